/**
 * Export format consumed by the aggregation pipeline:
 * {"video_id", "annotator_id", "T", "H", "W", "brush_radius",
 *  "strokes": [{"frame": int, "pixels": [[x, y], ...]}]}
 */

import { AnnotationSession } from './model';

export interface AnnotationExport {
  video_id: string;
  annotator_id: string;
  T: number;
  H: number;
  W: number;
  brush_radius: number;
  strokes: Array<{ frame: number; pixels: Array<[number, number]> }>;
}

export function exportRecords(session: AnnotationSession): AnnotationExport {
  const { width, height } = session.frames[0];
  return {
    video_id: session.videoId,
    annotator_id: session.annotatorId,
    T: session.frames.length,
    H: height,
    W: width,
    brush_radius: session.brushRadius,
    strokes: session.strokes.map((s) => ({
      frame: s.frame,
      pixels: s.pixels.map((p) => [p.x, p.y] as [number, number]),
    })),
  };
}

/** Validate an arbitrary object against the export schema; returns problems. */
export function validateExport(obj: unknown): string[] {
  const problems: string[] = [];
  if (typeof obj !== 'object' || obj === null) return ['export is not an object'];
  const rec = obj as Record<string, unknown>;

  for (const key of ['video_id', 'annotator_id']) {
    if (typeof rec[key] !== 'string') problems.push(`${key} must be a string`);
  }
  for (const key of ['T', 'H', 'W', 'brush_radius']) {
    const v = rec[key];
    if (typeof v !== 'number' || !Number.isInteger(v) || v < 0) {
      problems.push(`${key} must be a non-negative integer`);
    }
  }
  if (!Array.isArray(rec.strokes)) {
    problems.push('strokes must be an array');
    return problems;
  }
  const T = rec.T as number;
  const H = rec.H as number;
  const W = rec.W as number;
  rec.strokes.forEach((s, i) => {
    if (typeof s !== 'object' || s === null) {
      problems.push(`stroke ${i} is not an object`);
      return;
    }
    const stroke = s as Record<string, unknown>;
    const frame = stroke.frame;
    if (typeof frame !== 'number' || !Number.isInteger(frame) || frame < 0 || frame >= T) {
      problems.push(`stroke ${i}: frame ${String(frame)} outside [0, ${T})`);
    }
    if (!Array.isArray(stroke.pixels) || stroke.pixels.length === 0) {
      problems.push(`stroke ${i}: pixels must be a non-empty array`);
      return;
    }
    stroke.pixels.forEach((p, j) => {
      if (!Array.isArray(p) || p.length !== 2 ||
          !Number.isInteger(p[0]) || !Number.isInteger(p[1])) {
        problems.push(`stroke ${i} pixel ${j}: expected [x, y] integers`);
        return;
      }
      const [x, y] = p as [number, number];
      if (x < 0 || x >= W || y < 0 || y >= H) {
        problems.push(`stroke ${i} pixel ${j}: (${x}, ${y}) outside ${W}x${H}`);
      }
    });
  });
  return problems;
}
