/**
 * Flow-field to RGB rendering on the 55-bin Middlebury color wheel
 * (RY/YG/GC/CB/BM/MR = 15/6/4/11/13/6). Semantics mirror the segmentation
 * pipeline's renderer: hue from the flow angle, saturation from magnitude
 * over max_magnitude (clipped to 1), zero flow white.
 */

import type { RgbImage } from "./image.js";

const SEGMENTS = [15, 6, 4, 11, 13, 6];

export function makeColorwheel(): number[][] {
    const ncols = SEGMENTS.reduce((a, b) => a + b, 0);
    const wheel: number[][] = Array.from({ length: ncols }, () => [0, 0, 0]);
    const [ry, yg, gc, cb, bm, mr] = SEGMENTS;
    let col = 0;
    for (let i = 0; i < ry; i++) {
        wheel[col + i][0] = 255;
        wheel[col + i][1] = Math.floor((255 * i) / ry);
    }
    col += ry;
    for (let i = 0; i < yg; i++) {
        wheel[col + i][0] = 255 - Math.floor((255 * i) / yg);
        wheel[col + i][1] = 255;
    }
    col += yg;
    for (let i = 0; i < gc; i++) {
        wheel[col + i][1] = 255;
        wheel[col + i][2] = Math.floor((255 * i) / gc);
    }
    col += gc;
    for (let i = 0; i < cb; i++) {
        wheel[col + i][1] = 255 - Math.floor((255 * i) / cb);
        wheel[col + i][2] = 255;
    }
    col += cb;
    for (let i = 0; i < bm; i++) {
        wheel[col + i][2] = 255;
        wheel[col + i][0] = Math.floor((255 * i) / bm);
    }
    col += bm;
    for (let i = 0; i < mr; i++) {
        wheel[col + i][2] = 255 - Math.floor((255 * i) / mr);
        wheel[col + i][0] = 255;
    }
    return wheel;
}

export interface FlowField {
    height: number;
    width: number;
    u: Float64Array;
    v: Float64Array;
}

export function flowToRgb(flow: FlowField, maxMagnitude?: number): RgbImage {
    const n = flow.width * flow.height;
    let mm = maxMagnitude ?? 0;
    if (maxMagnitude === undefined) {
        for (let i = 0; i < n; i++) mm = Math.max(mm, Math.hypot(flow.u[i], flow.v[i]));
    }
    if (mm <= 0) mm = 1;

    const wheel = makeColorwheel();
    const ncols = wheel.length;
    const data = new Uint8Array(n * 3);
    for (let i = 0; i < n; i++) {
        let u = flow.u[i] / mm;
        let v = flow.v[i] / mm;
        let rad = Math.hypot(u, v);
        if (rad > 1) {
            u /= rad;
            v /= rad;
            rad = 1;
        }
        const angle = Math.atan2(-v, -u) / Math.PI;
        const fk = ((angle + 1) / 2) * (ncols - 1);
        const k0 = Math.floor(fk);
        const k1 = k0 + 1 === ncols ? 0 : k0 + 1;
        const f = fk - k0;
        for (let c = 0; c < 3; c++) {
            let col = ((1 - f) * wheel[k0][c]) / 255 + (f * wheel[k1][c]) / 255;
            col = 1 - rad * (1 - col);
            data[i * 3 + c] = Math.floor(255 * col);
        }
    }
    return { width: flow.width, height: flow.height, data };
}
