// Pure client-side view state: zoom and rotation never touch the network.

export interface ViewTransform {
  zoom: number;     // 1 = native resolution
  rotation: number; // degrees, multiples of 90
}

export const INITIAL_VIEW: ViewTransform = { zoom: 1, rotation: 0 };

const ZOOM_STEPS = [0.5, 1, 2, 3, 4, 6, 8];

export function zoomIn(v: ViewTransform): ViewTransform {
  const next = ZOOM_STEPS.find((z) => z > v.zoom);
  return { ...v, zoom: next ?? v.zoom };
}

export function zoomOut(v: ViewTransform): ViewTransform {
  const smaller = ZOOM_STEPS.filter((z) => z < v.zoom);
  return { ...v, zoom: smaller.length ? smaller[smaller.length - 1] : v.zoom };
}

export function rotate(v: ViewTransform, quarterTurns = 1): ViewTransform {
  return { ...v, rotation: ((v.rotation + quarterTurns * 90) % 360 + 360) % 360 };
}

export function resetView(): ViewTransform {
  return { ...INITIAL_VIEW };
}

// Nearest-neighbor upscaling so generation artifacts stay visible under zoom.
export function cssTransform(v: ViewTransform): { transform: string; imageRendering: string } {
  return {
    transform: `scale(${v.zoom}) rotate(${v.rotation}deg)`,
    imageRendering: 'pixelated',
  };
}
