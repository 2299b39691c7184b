/**
 * Single-array binary format (magic \x93NUMPY, version 1.0) encoder/decoder.
 *
 * The byte layout matches the mainstream serializer exactly: sorted header
 * keys, trailing comma, space padding to a 64-byte boundary, final newline.
 * Only the two dtypes of the pipeline contract are supported: little-endian
 * float32 ('<f4') for features/flow and uint8 ('|u1') for masks.
 */

import * as fs from "node:fs";
import * as path from "node:path";

const MAGIC = Buffer.from([0x93, 0x4e, 0x55, 0x4d, 0x50, 0x59]); // \x93NUMPY
const HEADER_ALIGN = 64;

export type NpyDtype = "<f4" | "|u1";

export interface NpyArray {
    dtype: NpyDtype;
    shape: number[];
    data: Float32Array | Uint8Array;
}

function shapeRepr(shape: number[]): string {
    if (shape.length === 0) return "()";
    if (shape.length === 1) return `(${shape[0]},)`;
    return `(${shape.join(", ")})`;
}

export function encodeNpy(array: NpyArray): Buffer {
    const header = `{'descr': '${array.dtype}', 'fortran_order': False, 'shape': ${shapeRepr(
        array.shape,
    )}, }`;
    let raw = Buffer.from(header, "latin1");
    const unpadded = MAGIC.length + 2 + 2 + raw.length + 1;
    const pad = (HEADER_ALIGN - (unpadded % HEADER_ALIGN)) % HEADER_ALIGN;
    raw = Buffer.concat([raw, Buffer.alloc(pad, 0x20), Buffer.from("\n", "latin1")]);

    const head = Buffer.alloc(MAGIC.length + 4);
    MAGIC.copy(head, 0);
    head[6] = 1;
    head[7] = 0;
    head.writeUInt16LE(raw.length, 8);

    const count = array.shape.reduce((a, b) => a * b, 1);
    if (count !== array.data.length) {
        throw new Error(`shape ${shapeRepr(array.shape)} does not match ${array.data.length} values`);
    }
    const payload =
        array.dtype === "<f4"
            ? Buffer.from(new Float32Array(array.data as Float32Array).buffer)
            : Buffer.from(array.data as Uint8Array);
    return Buffer.concat([head, raw, payload]);
}

export function decodeNpy(buf: Buffer): NpyArray {
    if (buf.length < 10 || !buf.subarray(0, 6).equals(MAGIC)) {
        throw new Error("missing array-format magic bytes");
    }
    const major = buf[6];
    let headerLen: number;
    let headerStart: number;
    if (major === 1) {
        headerLen = buf.readUInt16LE(8);
        headerStart = 10;
    } else if (major === 2 || major === 3) {
        headerLen = buf.readUInt32LE(8);
        headerStart = 12;
    } else {
        throw new Error(`unsupported format version ${major}`);
    }
    const header = buf.subarray(headerStart, headerStart + headerLen).toString("latin1");
    const descrMatch = header.match(/'descr':\s*'([^']+)'/);
    const orderMatch = header.match(/'fortran_order':\s*(True|False)/);
    const shapeMatch = header.match(/'shape':\s*\(([^)]*)\)/);
    if (!descrMatch || !orderMatch || !shapeMatch) {
        throw new Error(`unparsable header: ${header}`);
    }
    if (orderMatch[1] === "True") {
        throw new Error("fortran_order arrays are not part of the contract");
    }
    const shape = shapeMatch[1]
        .split(",")
        .map((s) => s.trim())
        .filter((s) => s.length > 0)
        .map((s) => Number.parseInt(s, 10));
    const count = shape.reduce((a, b) => a * b, 1);
    const payload = buf.subarray(headerStart + headerLen);
    const descr = descrMatch[1];
    if (descr === "<f4") {
        if (payload.length !== count * 4) throw new Error("truncated payload");
        const data = new Float32Array(count);
        for (let i = 0; i < count; i++) data[i] = payload.readFloatLE(i * 4);
        return { dtype: "<f4", shape, data };
    }
    if (descr === "|u1" || descr === "u1") {
        if (payload.length !== count) throw new Error("truncated payload");
        return { dtype: "|u1", shape, data: Uint8Array.from(payload) };
    }
    throw new Error(`dtype ${descr} not supported`);
}

export function writeNpy(file: string, array: NpyArray): void {
    fs.mkdirSync(path.dirname(file), { recursive: true });
    fs.writeFileSync(file, encodeNpy(array));
}

export function readNpy(file: string): NpyArray {
    return decodeNpy(fs.readFileSync(file));
}
