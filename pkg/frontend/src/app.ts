/**
 * Browser wiring: canvas display with paint overlay, frame scrubber,
 * looping playback, undo and JSON export. All annotation state lives in
 * the session model; frame bitmaps are display-only.
 */

import {
  AnnotationSession,
  createSession,
  paintStroke,
  setFrame,
  strokesOnFrame,
  undoStroke,
} from './model';
import { exportRecords, validateExport } from './schema';

interface LoadedFrame {
  name: string;
  bitmap: ImageBitmap;
}

const FPS = 30; // clips loop as ~3-second segments at t frames

let session: AnnotationSession | null = null;
let frames: LoadedFrame[] = [];
let playing = false;
let dragPath: Array<{ x: number; y: number }> = [];

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

function showError(msg: string) {
  const box = $('error-box');
  box.textContent = msg;
  box.style.display = msg ? 'block' : 'none';
}

async function loadFiles(fileList: FileList) {
  const pngs = Array.from(fileList)
    .filter((f) => /\.png$/i.test(f.name))
    .sort((a, b) => a.name.localeCompare(b.name, undefined, { numeric: true }));
  if (pngs.length === 0) {
    showError('no .png frames found in the selected directory');
    return;
  }
  try {
    frames = [];
    for (const file of pngs) {
      const bitmap = await createImageBitmap(await blobFromFile(file));
      frames.push({ name: file.name, bitmap });
    }
    const annotator = ($('annotator') as HTMLInputElement).value || 'anonymous';
    const video = ($('video-id') as HTMLInputElement).value || pngs[0].name.replace(/\d+\.png$/i, '');
    const radius = parseInt(($('brush') as HTMLInputElement).value, 10) || 4;
    session = createSession(
      frames.map((f) => ({ name: f.name, width: f.bitmap.width, height: f.bitmap.height })),
      annotator,
      video,
      radius
    );
    const scrub = $('scrubber') as HTMLInputElement;
    scrub.min = '0';
    scrub.max = String(frames.length - 1);
    scrub.value = '0';
    showError('');
    resizeCanvas();
    render();
  } catch (err) {
    showError(String(err));
  }
}

function blobFromFile(f: File): Promise<Blob> {
  return Promise.resolve(f);
}

function resizeCanvas() {
  if (!session) return;
  const canvas = $('canvas') as HTMLCanvasElement;
  canvas.width = session.frames[0].width;
  canvas.height = session.frames[0].height;
}

function render() {
  if (!session) return;
  const canvas = $('canvas') as HTMLCanvasElement;
  const ctx = canvas.getContext('2d')!;
  const idx = session.currentFrame;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(frames[idx].bitmap, 0, 0);
  // stroke overlay: translucent paint, frame pixels untouched
  ctx.fillStyle = 'rgba(255, 64, 64, 0.45)';
  for (const stroke of strokesOnFrame(session, idx)) {
    for (const p of stroke.pixels) {
      ctx.fillRect(p.x, p.y, 1, 1);
    }
  }
  ($('frame-label') as HTMLElement).textContent =
    `frame ${idx + 1}/${session.frames.length}`;
  ($('scrubber') as HTMLInputElement).value = String(idx);
}

function canvasPoint(ev: MouseEvent): { x: number; y: number } {
  const canvas = $('canvas') as HTMLCanvasElement;
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * canvas.width,
    y: ((ev.clientY - rect.top) / rect.height) * canvas.height,
  };
}

function tick() {
  if (playing && session) {
    setFrame(session, (session.currentFrame + 1) % session.frames.length);
    render();
  }
  window.setTimeout(tick, 1000 / FPS);
}

function doExport() {
  if (!session) {
    showError('load a clip before exporting');
    return;
  }
  const record = exportRecords(session);
  const problems = validateExport(record);
  if (problems.length > 0) {
    showError(`refusing to export an invalid record: ${problems[0]}`);
    return;
  }
  const blob = new Blob([JSON.stringify(record, null, 1)], { type: 'application/json' });
  const a = document.createElement('a');
  a.href = URL.createObjectURL(blob);
  a.download = `${record.video_id}_${record.annotator_id}.json`;
  a.click();
  URL.revokeObjectURL(a.href);
}

export function wireUp() {
  ($('file-input') as HTMLInputElement).addEventListener('change', (ev) => {
    const input = ev.target as HTMLInputElement;
    if (input.files) void loadFiles(input.files);
  });

  const canvas = $('canvas') as HTMLCanvasElement;
  canvas.addEventListener('mousedown', (ev) => {
    dragPath = [canvasPoint(ev)];
  });
  canvas.addEventListener('mousemove', (ev) => {
    if (dragPath.length > 0) dragPath.push(canvasPoint(ev));
  });
  window.addEventListener('mouseup', () => {
    if (session && dragPath.length > 0) {
      paintStroke(session, dragPath);
      render();
    }
    dragPath = [];
  });

  ($('scrubber') as HTMLInputElement).addEventListener('input', (ev) => {
    if (!session) return;
    playing = false;
    setFrame(session, parseInt((ev.target as HTMLInputElement).value, 10));
    render();
  });
  $('play').addEventListener('click', () => {
    playing = !playing;
    ($('play') as HTMLElement).textContent = playing ? 'pause' : 'play';
  });
  $('undo').addEventListener('click', () => {
    if (session) {
      undoStroke(session);
      render();
    }
  });
  $('export').addEventListener('click', doExport);
  tick();
}

if (typeof document !== 'undefined' && document.getElementById('canvas')) {
  wireUp();
}
