/** Pixel format negotiated on the RFB channel. */
export interface PixelFormat {
  bitsPerPixel: number;
  depth: number;
  bigEndian: boolean;
  trueColor: boolean;
  redMax: number;
  greenMax: number;
  blueMax: number;
  redShift: number;
  greenShift: number;
  blueShift: number;
}

export const CANONICAL_FORMAT: PixelFormat = {
  bitsPerPixel: 32,
  depth: 24,
  bigEndian: false,
  trueColor: true,
  redMax: 255,
  greenMax: 255,
  blueMax: 255,
  redShift: 16,
  greenShift: 8,
  blueShift: 0,
};

export function bytesPerPixel(fmt: PixelFormat): number {
  return fmt.bitsPerPixel / 8;
}

/** Tight sends 3-byte r,g,b pixels for the 32bpp depth-24 form. */
export function usesTpixel(fmt: PixelFormat): boolean {
  return (
    fmt.bitsPerPixel === 32 &&
    fmt.depth === 24 &&
    fmt.redMax === 255 &&
    fmt.greenMax === 255 &&
    fmt.blueMax === 255
  );
}

export function tightPixelSize(fmt: PixelFormat): number {
  return usesTpixel(fmt) ? 3 : bytesPerPixel(fmt);
}

export function parsePixelFormat(block: Uint8Array): PixelFormat {
  if (block.length < 16) throw new Error("pixel format block too short");
  const view = new DataView(block.buffer, block.byteOffset, block.byteLength);
  return {
    bitsPerPixel: view.getUint8(0),
    depth: view.getUint8(1),
    bigEndian: view.getUint8(2) !== 0,
    trueColor: view.getUint8(3) !== 0,
    redMax: view.getUint16(4, false),
    greenMax: view.getUint16(6, false),
    blueMax: view.getUint16(8, false),
    redShift: view.getUint8(10),
    greenShift: view.getUint8(11),
    blueShift: view.getUint8(12),
  };
}

/** Expand one pixel value to 8-bit RGB channels. */
export function pixelToRgb(value: number, fmt: PixelFormat): [number, number, number] {
  const r = (value >>> fmt.redShift) & fmt.redMax;
  const g = (value >>> fmt.greenShift) & fmt.greenMax;
  const b = (value >>> fmt.blueShift) & fmt.blueMax;
  return [
    Math.round((r * 255) / fmt.redMax),
    Math.round((g * 255) / fmt.greenMax),
    Math.round((b * 255) / fmt.blueMax),
  ];
}
