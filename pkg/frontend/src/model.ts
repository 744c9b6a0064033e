/**
 * Annotation session state: pure logic, no DOM.
 *
 * A session tracks per-frame paint strokes over a loaded clip. Strokes are
 * rasterized as filled disks along the drag path, clipped to frame bounds.
 * The frame pixels themselves are never touched; annotation is an overlay.
 */

export interface FrameRef {
  /** identifier used for display; pixel data stays out of the model */
  name: string;
  width: number;
  height: number;
}

export interface Pixel {
  x: number;
  y: number;
}

export interface StrokeRecord {
  frame: number;
  pixels: Pixel[];
}

export interface AnnotationSession {
  annotatorId: string;
  videoId: string;
  frames: FrameRef[];
  currentFrame: number;
  brushRadius: number;
  strokes: StrokeRecord[];
}

export const DEFAULT_BRUSH_RADIUS = 4;

export function createSession(
  frames: FrameRef[],
  annotatorId: string,
  videoId: string,
  brushRadius: number = DEFAULT_BRUSH_RADIUS
): AnnotationSession {
  if (frames.length === 0) {
    throw new Error('cannot start a session without frames');
  }
  const { width, height } = frames[0];
  for (const f of frames) {
    if (f.width !== width || f.height !== height) {
      throw new Error(`frame ${f.name} is ${f.width}x${f.height}, expected ${width}x${height}`);
    }
  }
  if (brushRadius < 0) {
    throw new Error('brush radius must be non-negative');
  }
  return {
    annotatorId,
    videoId,
    frames,
    currentFrame: 0,
    brushRadius,
    strokes: [],
  };
}

export function setFrame(session: AnnotationSession, index: number): void {
  if (index < 0 || index >= session.frames.length) {
    throw new Error(`frame ${index} outside [0, ${session.frames.length})`);
  }
  session.currentFrame = index;
}

/** Integer pixels within `radius` of (cx, cy), clipped to the frame. */
export function diskPixels(
  cx: number,
  cy: number,
  radius: number,
  width: number,
  height: number
): Pixel[] {
  const out: Pixel[] = [];
  const r = Math.floor(radius);
  const bx = Math.round(cx);
  const by = Math.round(cy);
  for (let dy = -r; dy <= r; dy++) {
    for (let dx = -r; dx <= r; dx++) {
      if (dx * dx + dy * dy > radius * radius) continue;
      const x = bx + dx;
      const y = by + dy;
      if (x < 0 || x >= width || y < 0 || y >= height) continue;
      out.push({ x, y });
    }
  }
  return out;
}

/** Disk-rasterize a drag path (one or more points) into a unique pixel set. */
export function rasterizePath(
  path: Array<{ x: number; y: number }>,
  radius: number,
  width: number,
  height: number
): Pixel[] {
  const seen = new Set<number>();
  const out: Pixel[] = [];
  for (const p of path) {
    for (const px of diskPixels(p.x, p.y, radius, width, height)) {
      const key = px.y * width + px.x;
      if (seen.has(key)) continue;
      seen.add(key);
      out.push(px);
    }
  }
  return out;
}

/**
 * Append one painted stroke on the current frame. Empty rasterizations
 * (fully outside the canvas) are dropped so undo stays meaningful.
 */
export function paintStroke(
  session: AnnotationSession,
  path: Array<{ x: number; y: number }>,
  radius?: number
): StrokeRecord | null {
  const { width, height } = session.frames[0];
  const pixels = rasterizePath(path, radius ?? session.brushRadius, width, height);
  if (pixels.length === 0) return null;
  const record: StrokeRecord = { frame: session.currentFrame, pixels };
  session.strokes.push(record);
  return record;
}

/** Remove the most recent stroke (any frame). Returns it, or null if empty. */
export function undoStroke(session: AnnotationSession): StrokeRecord | null {
  return session.strokes.pop() ?? null;
}

export function strokesOnFrame(session: AnnotationSession, frame: number): StrokeRecord[] {
  return session.strokes.filter((s) => s.frame === frame);
}
