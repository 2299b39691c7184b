import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { describe, expect, it } from "vitest";
import { flowToRgb, makeColorwheel, type FlowField } from "../src/colorwheel.js";
import { decodePngRgb } from "../src/image.js";
import { encodeNpy } from "../src/npy.js";
import { pairFrames } from "../src/pairing.js";

function randomFlow(seed: number, h: number, w: number): FlowField {
    // deterministic LCG so the fixture is stable
    let s = seed >>> 0;
    const rand = () => {
        s = (s * 1664525 + 1013904223) >>> 0;
        return s / 2 ** 32 - 0.5;
    };
    const u = new Float64Array(h * w);
    const v = new Float64Array(h * w);
    for (let i = 0; i < h * w; i++) {
        u[i] = rand() * 12;
        v[i] = rand() * 12;
    }
    return { height: h, width: w, u, v };
}

describe("frame pairing", () => {
    it("pairs forward with a backward final pair", () => {
        expect(pairFrames(["1", "2", "3"])).toEqual([
            ["1", "2"],
            ["2", "3"],
            ["3", "2"],
        ]);
    });

    it("rejects single-frame sequences", () => {
        expect(() => pairFrames(["only"])).toThrow(/at least 2/);
    });
});

describe("color wheel", () => {
    it("has the canonical 55 bins", () => {
        const wheel = makeColorwheel();
        expect(wheel.length).toBe(55);
        expect(wheel[0]).toEqual([255, 0, 0]);
    });

    it("renders zero flow as white", () => {
        const flow: FlowField = {
            height: 3,
            width: 4,
            u: new Float64Array(12),
            v: new Float64Array(12),
        };
        const img = flowToRgb(flow);
        expect(Array.from(img.data).every((value) => value === 255)).toBe(true);
    });

    it("agrees with the segmentation pipeline within one intensity level", () => {
        // the cross-implementation contract: same flow array in, same PNG out
        const dir = fs.mkdtempSync(path.join(os.tmpdir(), "flowrgb-"));
        const flow = randomFlow(7, 12, 16);
        const interleaved = new Float32Array(12 * 16 * 2);
        for (let i = 0; i < 12 * 16; i++) {
            interleaved[i * 2] = flow.u[i];
            interleaved[i * 2 + 1] = flow.v[i];
        }
        // float32 storage quantizes; render from the same float32 values
        for (let i = 0; i < 12 * 16; i++) {
            flow.u[i] = interleaved[i * 2];
            flow.v[i] = interleaved[i * 2 + 1];
        }
        fs.mkdirSync(path.join(dir, "flows", "s"), { recursive: true });
        fs.writeFileSync(
            path.join(dir, "flows", "s", "000.npy"),
            encodeNpy({ dtype: "<f4", shape: [12, 16, 2], data: interleaved }),
        );
        execFileSync("python3", [
            "-m",
            "flowcut.cli",
            "flow2rgb",
            "--in",
            path.join(dir, "flows"),
            "--out",
            path.join(dir, "rgb"),
        ]);
        const theirs = decodePngRgb(fs.readFileSync(path.join(dir, "rgb", "s", "000.png")));
        const mine = flowToRgb(flow);
        expect(theirs.width).toBe(mine.width);
        let worst = 0;
        for (let i = 0; i < mine.data.length; i++) {
            worst = Math.max(worst, Math.abs(mine.data[i] - theirs.data[i]));
        }
        expect(worst).toBeLessThanOrEqual(1);
    });
});
