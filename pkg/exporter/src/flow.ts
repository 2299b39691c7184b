/**
 * Optical flow backends behind one interface so the estimation model is
 * swappable; the backend id lands in the export metadata sidecar.
 *
 * The built-in backend is classical Horn-Schunck (variational, Jacobi
 * iterations): fully deterministic and dependency-free, suitable for smoke
 * runs and tests. Pretrained flow networks stay out of process: run them
 * separately, save (H, W, 2) float32 arrays, and load them with the
 * "precomputed" backend.
 */

import * as path from "node:path";
import type { FlowField } from "./colorwheel.js";
import { type RgbImage, toGray } from "./image.js";
import { readNpy } from "./npy.js";

export interface FlowBackend {
    readonly id: string;
    compute(src: RgbImage, dst: RgbImage, seq: string, frame: string): FlowField;
}

export class HornSchunckFlow implements FlowBackend {
    readonly id: string;

    constructor(
        private readonly alpha = 15.0,
        private readonly iterations = 120,
    ) {
        this.id = `hornschunck(alpha=${alpha},iters=${iterations})`;
    }

    compute(src: RgbImage, dst: RgbImage): FlowField {
        if (src.width !== dst.width || src.height !== dst.height) {
            throw new Error("flow frames must share dimensions");
        }
        const w = src.width;
        const h = src.height;
        const i1 = toGray(src);
        const i2 = toGray(dst);
        const at = (img: Float64Array, y: number, x: number) =>
            img[Math.min(Math.max(y, 0), h - 1) * w + Math.min(Math.max(x, 0), w - 1)];

        const ix = new Float64Array(w * h);
        const iy = new Float64Array(w * h);
        const it = new Float64Array(w * h);
        for (let y = 0; y < h; y++) {
            for (let x = 0; x < w; x++) {
                const k = y * w + x;
                ix[k] =
                    0.25 *
                    (at(i1, y, x + 1) - at(i1, y, x) + at(i1, y + 1, x + 1) - at(i1, y + 1, x)) +
                    0.25 *
                        (at(i2, y, x + 1) - at(i2, y, x) + at(i2, y + 1, x + 1) - at(i2, y + 1, x));
                iy[k] =
                    0.25 *
                    (at(i1, y + 1, x) - at(i1, y, x) + at(i1, y + 1, x + 1) - at(i1, y, x + 1)) +
                    0.25 *
                        (at(i2, y + 1, x) - at(i2, y, x) + at(i2, y + 1, x + 1) - at(i2, y, x + 1));
                it[k] =
                    0.25 *
                    (at(i2, y, x) - at(i1, y, x) + at(i2, y + 1, x) - at(i1, y + 1, x) +
                        at(i2, y, x + 1) - at(i1, y, x + 1) +
                        at(i2, y + 1, x + 1) - at(i1, y + 1, x + 1));
            }
        }

        let u = new Float64Array(w * h);
        let v = new Float64Array(w * h);
        const a2 = this.alpha * this.alpha;
        for (let iter = 0; iter < this.iterations; iter++) {
            const un = new Float64Array(w * h);
            const vn = new Float64Array(w * h);
            for (let y = 0; y < h; y++) {
                for (let x = 0; x < w; x++) {
                    const k = y * w + x;
                    const ubar =
                        (at(u as unknown as Float64Array, y - 1, x) +
                            at(u, y + 1, x) +
                            at(u, y, x - 1) +
                            at(u, y, x + 1)) /
                        4;
                    const vbar =
                        (at(v, y - 1, x) + at(v, y + 1, x) + at(v, y, x - 1) + at(v, y, x + 1)) / 4;
                    const t = (ix[k] * ubar + iy[k] * vbar + it[k]) / (a2 + ix[k] ** 2 + iy[k] ** 2);
                    un[k] = ubar - ix[k] * t;
                    vn[k] = vbar - iy[k] * t;
                }
            }
            u = un;
            v = vn;
        }
        return { height: h, width: w, u, v };
    }
}

/** Loads flow fields produced out of process as <root>/<seq>/<frame>.npy. */
export class PrecomputedFlow implements FlowBackend {
    readonly id: string;

    constructor(
        private readonly root: string,
        modelId = "precomputed",
    ) {
        this.id = modelId;
    }

    compute(src: RgbImage, _dst: RgbImage, seq: string, frame: string): FlowField {
        const file = path.join(this.root, seq, `${frame}.npy`);
        const arr = readNpy(file);
        if (arr.dtype !== "<f4" || arr.shape.length !== 3 || arr.shape[2] !== 2) {
            throw new Error(`${file}: flow arrays must be (H, W, 2) float32`);
        }
        const [h, w] = arr.shape;
        if (h !== src.height || w !== src.width) {
            throw new Error(`${file}: flow is ${h}x${w}, frames are ${src.height}x${src.width}`);
        }
        const u = new Float64Array(h * w);
        const v = new Float64Array(h * w);
        const data = arr.data as Float32Array;
        for (let i = 0; i < h * w; i++) {
            u[i] = data[i * 2];
            v[i] = data[i * 2 + 1];
        }
        return { height: h, width: w, u, v };
    }
}
