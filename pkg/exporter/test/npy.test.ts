import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { describe, expect, it } from "vitest";
import { decodeNpy, encodeNpy } from "../src/npy.js";

function tmpdir(): string {
    return fs.mkdtempSync(path.join(os.tmpdir(), "npy-test-"));
}

function python(code: string): string {
    return execFileSync("python3", ["-c", code], { encoding: "utf8" });
}

describe("npy codec", () => {
    it("round-trips float32 and uint8 arrays", () => {
        const f = new Float32Array([0, 1.5, -2.25, 3e5, -0.125, 7]);
        const encoded = encodeNpy({ dtype: "<f4", shape: [2, 3], data: f });
        const back = decodeNpy(encoded);
        expect(back.shape).toEqual([2, 3]);
        expect(Array.from(back.data as Float32Array)).toEqual(Array.from(f));

        const u = new Uint8Array([0, 1, 1, 0]);
        const encoded2 = encodeNpy({ dtype: "|u1", shape: [4], data: u });
        expect(Array.from(decodeNpy(encoded2).data as Uint8Array)).toEqual([0, 1, 1, 0]);
    });

    it("produces byte-identical output to the reference serializer", () => {
        const dir = tmpdir();
        const values = [1.25, -3.5, 0, 42, 1e-7, -2e8];
        const mine = encodeNpy({
            dtype: "<f4",
            shape: [1, 2, 3],
            data: new Float32Array(values),
        });
        fs.writeFileSync(path.join(dir, "mine.npy"), mine);
        python(
            `import numpy as np; np.save(${JSON.stringify(path.join(dir, "ref.npy"))}, ` +
                `np.array(${JSON.stringify(values)}, dtype=np.float32).reshape(1,2,3))`,
        );
        const ref = fs.readFileSync(path.join(dir, "ref.npy"));
        expect(mine.equals(ref)).toBe(true);
    });

    it("reads files written by the reference serializer", () => {
        const dir = tmpdir();
        python(
            `import numpy as np; np.save(${JSON.stringify(path.join(dir, "a.npy"))}, ` +
                `np.arange(24, dtype=np.float32).reshape(4,3,2))`,
        );
        const arr = decodeNpy(fs.readFileSync(path.join(dir, "a.npy")));
        expect(arr.dtype).toBe("<f4");
        expect(arr.shape).toEqual([4, 3, 2]);
        expect((arr.data as Float32Array)[23]).toBe(23);
    });

    it("is readable by the segmentation pipeline's reader", () => {
        const dir = tmpdir();
        const file = path.join(dir, "grid.npy");
        const data = new Float32Array(2 * 2 * 3).map((_, i) => i / 4);
        fs.writeFileSync(file, encodeNpy({ dtype: "<f4", shape: [2, 2, 3], data }));
        const out = python(
            "from flowcut.tensor_io import read_npy; " +
                `a = read_npy(${JSON.stringify(file)}); print(a.shape, a.dtype, a.ravel()[5])`,
        );
        expect(out.trim()).toBe("(2, 2, 3) float32 1.25");
    });

    it("rejects fortran-order and unknown dtypes", () => {
        const dir = tmpdir();
        python(
            `import numpy as np; np.save(${JSON.stringify(path.join(dir, "f.npy"))}, ` +
                "np.asfortranarray(np.zeros((2,3), dtype=np.float32)))",
        );
        expect(() => decodeNpy(fs.readFileSync(path.join(dir, "f.npy")))).toThrow(/fortran/);
        python(
            `import numpy as np; np.save(${JSON.stringify(path.join(dir, "d.npy"))}, ` +
                "np.zeros((2,), dtype=np.float64))",
        );
        expect(() => decodeNpy(fs.readFileSync(path.join(dir, "d.npy")))).toThrow(/not supported/);
    });
});
