/** RGB image loading/saving (PNG, JPEG, binary PPM) and bilinear resize. */

import * as fs from "node:fs";
import * as path from "node:path";
import jpeg from "jpeg-js";
import { PNG } from "pngjs";

export interface RgbImage {
    width: number;
    height: number;
    /** Interleaved RGB, length = width * height * 3. */
    data: Uint8Array;
}

export function decodePngRgb(buf: Buffer): RgbImage {
    const png = PNG.sync.read(buf);
    const out = new Uint8Array(png.width * png.height * 3);
    for (let i = 0; i < png.width * png.height; i++) {
        out[i * 3] = png.data[i * 4];
        out[i * 3 + 1] = png.data[i * 4 + 1];
        out[i * 3 + 2] = png.data[i * 4 + 2];
    }
    return { width: png.width, height: png.height, data: out };
}

export function encodePngRgb(img: RgbImage): Buffer {
    const png = new PNG({ width: img.width, height: img.height });
    for (let i = 0; i < img.width * img.height; i++) {
        png.data[i * 4] = img.data[i * 3];
        png.data[i * 4 + 1] = img.data[i * 3 + 1];
        png.data[i * 4 + 2] = img.data[i * 3 + 2];
        png.data[i * 4 + 3] = 255;
    }
    return PNG.sync.write(png);
}

function decodePpm(buf: Buffer): RgbImage {
    // Binary P6 only; ASCII headers with whitespace/comments.
    let pos = 0;
    const token = (): string => {
        while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) pos++;
        if (buf[pos] === 0x23) {
            while (pos < buf.length && buf[pos] !== 0x0a) pos++;
            return token();
        }
        const start = pos;
        while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++;
        return buf.subarray(start, pos).toString("ascii");
    };
    if (token() !== "P6") throw new Error("only binary (P6) PPM is supported");
    const width = Number.parseInt(token(), 10);
    const height = Number.parseInt(token(), 10);
    const maxval = Number.parseInt(token(), 10);
    if (maxval !== 255) throw new Error("only 8-bit PPM is supported");
    pos++; // single whitespace after maxval
    const data = Uint8Array.from(buf.subarray(pos, pos + width * height * 3));
    return { width, height, data };
}

function encodePpm(img: RgbImage): Buffer {
    const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, "ascii");
    return Buffer.concat([header, Buffer.from(img.data)]);
}

export function readImage(file: string): RgbImage {
    const buf = fs.readFileSync(file);
    const ext = path.extname(file).toLowerCase();
    if (ext === ".png") return decodePngRgb(buf);
    if (ext === ".jpg" || ext === ".jpeg") {
        const raw = jpeg.decode(buf, { useTArray: true, formatAsRGBA: true });
        const out = new Uint8Array(raw.width * raw.height * 3);
        for (let i = 0; i < raw.width * raw.height; i++) {
            out[i * 3] = raw.data[i * 4];
            out[i * 3 + 1] = raw.data[i * 4 + 1];
            out[i * 3 + 2] = raw.data[i * 4 + 2];
        }
        return { width: raw.width, height: raw.height, data: out };
    }
    if (ext === ".ppm") return decodePpm(buf);
    throw new Error(`unsupported image extension: ${file}`);
}

export function writeImage(file: string, img: RgbImage): void {
    fs.mkdirSync(path.dirname(file), { recursive: true });
    const ext = path.extname(file).toLowerCase();
    if (ext === ".png") {
        fs.writeFileSync(file, encodePngRgb(img));
    } else if (ext === ".ppm") {
        fs.writeFileSync(file, encodePpm(img));
    } else {
        throw new Error(`unsupported output extension: ${file}`);
    }
}

export function resizeBilinear(img: RgbImage, height: number, width: number): RgbImage {
    if (img.height === height && img.width === width) return img;
    const out = new Uint8Array(width * height * 3);
    const sx = img.width / width;
    const sy = img.height / height;
    for (let y = 0; y < height; y++) {
        const fy = Math.min((y + 0.5) * sy - 0.5, img.height - 1);
        const y0 = Math.max(Math.floor(fy), 0);
        const y1 = Math.min(y0 + 1, img.height - 1);
        const wy = fy - y0;
        for (let x = 0; x < width; x++) {
            const fx = Math.min((x + 0.5) * sx - 0.5, img.width - 1);
            const x0 = Math.max(Math.floor(fx), 0);
            const x1 = Math.min(x0 + 1, img.width - 1);
            const wx = fx - x0;
            for (let c = 0; c < 3; c++) {
                const v00 = img.data[(y0 * img.width + x0) * 3 + c];
                const v01 = img.data[(y0 * img.width + x1) * 3 + c];
                const v10 = img.data[(y1 * img.width + x0) * 3 + c];
                const v11 = img.data[(y1 * img.width + x1) * 3 + c];
                const top = v00 * (1 - wx) + v01 * wx;
                const bottom = v10 * (1 - wx) + v11 * wx;
                out[(y * width + x) * 3 + c] = Math.round(top * (1 - wy) + bottom * wy);
            }
        }
    }
    return { width, height, data: out };
}

export function toGray(img: RgbImage): Float64Array {
    const out = new Float64Array(img.width * img.height);
    for (let i = 0; i < out.length; i++) {
        out[i] =
            0.299 * img.data[i * 3] + 0.587 * img.data[i * 3 + 1] + 0.114 * img.data[i * 3 + 2];
    }
    return out;
}
