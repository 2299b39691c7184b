/**
 * Patch feature backbones. The production backbone is a ViT encoder whose
 * output is the per-patch KEY projection of the final attention block (all
 * heads concatenated), the representation the downstream graph-cut consumes.
 *
 * Weights load from a directory holding `config.json` and `weights.json`
 * (base64 float32 tensors, names below). Convert a pretrained checkpoint to
 * this schema offline; nothing here trains or downloads models. A missing or
 * malformed directory raises ModelLoadError, which the CLI turns into a
 * nonzero exit.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";
import type { RgbImage } from "./image.js";

// ImageNet normalization, the convention of self-supervised ViT checkpoints.
const MEAN = [0.485, 0.456, 0.406];
const STD = [0.229, 0.224, 0.225];

export class ModelLoadError extends Error {}

export interface PatchFeatures {
    rows: number;
    cols: number;
    channels: number;
    /** Row-major (rows * cols * channels) float32. */
    data: Float32Array;
}

export interface Backbone {
    readonly id: string;
    readonly patchSize: number;
    readonly channels: number;
    keyFeatures(image: RgbImage): PatchFeatures;
}

export interface VitConfig {
    embed_dim: number;
    depth: number;
    num_heads: number;
    patch_size: number;
    mlp_ratio?: number;
    pos_grid: [number, number];
}

type TensorMap = Map<string, tf.Tensor>;

function requiredTensorNames(cfg: VitConfig): string[] {
    const names = ["patch_embed.weight", "patch_embed.bias", "cls_token", "pos_embed"];
    for (let i = 0; i < cfg.depth; i++) {
        for (const suffix of [
            "norm1.weight",
            "norm1.bias",
            "attn.qkv.weight",
            "attn.qkv.bias",
            "attn.proj.weight",
            "attn.proj.bias",
            "norm2.weight",
            "norm2.bias",
            "mlp.fc1.weight",
            "mlp.fc1.bias",
            "mlp.fc2.weight",
            "mlp.fc2.bias",
        ]) {
            names.push(`blocks.${i}.${suffix}`);
        }
    }
    return names;
}

function layerNorm(x: tf.Tensor, weight: tf.Tensor, bias: tf.Tensor): tf.Tensor {
    const mean = x.mean(-1, true);
    const centered = x.sub(mean);
    const variance = centered.square().mean(-1, true);
    return centered.div(variance.add(1e-6).sqrt()).mul(weight).add(bias);
}

function gelu(x: tf.Tensor): tf.Tensor {
    return x.mul(x.div(Math.SQRT2).erf().add(1)).mul(0.5);
}

export class VitKeyBackbone implements Backbone {
    readonly id: string;
    readonly patchSize: number;
    readonly channels: number;

    constructor(
        private readonly cfg: VitConfig,
        private readonly tensors: TensorMap,
        id: string,
    ) {
        this.id = id;
        this.patchSize = cfg.patch_size;
        this.channels = cfg.embed_dim;
        for (const name of requiredTensorNames(cfg)) {
            if (!tensors.has(name)) {
                throw new ModelLoadError(`weights are missing tensor ${name}`);
            }
        }
    }

    private t(name: string): tf.Tensor {
        const tensor = this.tensors.get(name);
        if (!tensor) throw new ModelLoadError(`weights are missing tensor ${name}`);
        return tensor;
    }

    /** (1, N, C) patch tokens from non-overlapping patches. */
    private embed(image: RgbImage, rows: number, cols: number): tf.Tensor {
        const p = this.patchSize;
        const n = rows * cols;
        const flat = new Float32Array(n * p * p * 3);
        for (let r = 0; r < rows; r++) {
            for (let c = 0; c < cols; c++) {
                const base = (r * cols + c) * p * p * 3;
                for (let dy = 0; dy < p; dy++) {
                    for (let dx = 0; dx < p; dx++) {
                        const px = ((r * p + dy) * image.width + (c * p + dx)) * 3;
                        const off = base + (dy * p + dx) * 3;
                        for (let ch = 0; ch < 3; ch++) {
                            flat[off + ch] = (image.data[px + ch] / 255 - MEAN[ch]) / STD[ch];
                        }
                    }
                }
            }
        }
        const patches = tf.tensor2d(flat, [n, p * p * 3]);
        const w = this.t("patch_embed.weight"); // (C, p*p*3)
        const b = this.t("patch_embed.bias");
        return patches.matMul(w as tf.Tensor2D, false, true).add(b).expandDims(0);
    }

    /** Positional embeddings resized to the current patch grid. */
    private positional(rows: number, cols: number): tf.Tensor {
        const pos = this.t("pos_embed"); // (1 + gr*gc, C)
        const [gr, gc] = this.cfg.pos_grid;
        const c = this.cfg.embed_dim;
        const clsPos = pos.slice([0, 0], [1, c]);
        let gridPos = pos.slice([1, 0], [gr * gc, c]);
        if (gr !== rows || gc !== cols) {
            const asImage = gridPos.reshape([1, gr, gc, c]);
            gridPos = tf.image
                .resizeBilinear(asImage as tf.Tensor4D, [rows, cols], true)
                .reshape([rows * cols, c]);
        }
        return tf.concat([clsPos, gridPos], 0).expandDims(0);
    }

    keyFeatures(image: RgbImage): PatchFeatures {
        const p = this.patchSize;
        if (image.height % p !== 0 || image.width % p !== 0) {
            throw new Error(
                `image ${image.height}x${image.width} is not a multiple of patch size ${p}`,
            );
        }
        const rows = image.height / p;
        const cols = image.width / p;
        const heads = this.cfg.num_heads;
        const c = this.cfg.embed_dim;

        const data = tf.tidy(() => {
            let x = this.embed(image, rows, cols); // (1, N, C)
            const cls = this.t("cls_token").reshape([1, 1, c]);
            x = tf.concat([cls, x], 1).add(this.positional(rows, cols));

            for (let i = 0; i < this.cfg.depth; i++) {
                const prefix = `blocks.${i}`;
                const normed = layerNorm(
                    x,
                    this.t(`${prefix}.norm1.weight`),
                    this.t(`${prefix}.norm1.bias`),
                );
                const qkv = normed
                    .matMul(this.t(`${prefix}.attn.qkv.weight`) as tf.Tensor2D, false, true)
                    .add(this.t(`${prefix}.attn.qkv.bias`)); // (1, T, 3C)
                const tokens = qkv.shape[1] as number;
                const split = qkv.reshape([tokens, 3, heads, c / heads]).transpose([1, 2, 0, 3]);
                const q = split.slice([0, 0, 0, 0], [1, heads, tokens, c / heads]).squeeze([0]);
                const k = split.slice([1, 0, 0, 0], [1, heads, tokens, c / heads]).squeeze([0]);
                const v = split.slice([2, 0, 0, 0], [1, heads, tokens, c / heads]).squeeze([0]);

                if (i === this.cfg.depth - 1) {
                    // Key projections of the final attention layer: drop the
                    // class token, concatenate heads back to C.
                    return k
                        .transpose([1, 0, 2]) // (T, heads, hd)
                        .reshape([tokens, c])
                        .slice([1, 0], [tokens - 1, c])
                        .dataSync() as Float32Array;
                }

                const scale = 1 / Math.sqrt(c / heads);
                const attn = tf.softmax(q.matMul(k, false, true).mul(scale));
                const context = attn
                    .matMul(v) // (heads, T, hd)
                    .transpose([1, 0, 2])
                    .reshape([1, tokens, c]);
                const projected = context
                    .matMul(this.t(`${prefix}.attn.proj.weight`) as tf.Tensor2D, false, true)
                    .add(this.t(`${prefix}.attn.proj.bias`));
                x = x.add(projected);

                const normed2 = layerNorm(
                    x,
                    this.t(`${prefix}.norm2.weight`),
                    this.t(`${prefix}.norm2.bias`),
                );
                const hidden = gelu(
                    normed2
                        .matMul(this.t(`${prefix}.mlp.fc1.weight`) as tf.Tensor2D, false, true)
                        .add(this.t(`${prefix}.mlp.fc1.bias`)),
                );
                const mlpOut = hidden
                    .matMul(this.t(`${prefix}.mlp.fc2.weight`) as tf.Tensor2D, false, true)
                    .add(this.t(`${prefix}.mlp.fc2.bias`));
                x = x.add(mlpOut);
            }
            throw new Error("unreachable: depth >= 1 always returns from the last block");
        });
        return { rows, cols, channels: c, data };
    }
}

// ---------------------------------------------------------------------------
// weight loading and generation


export function loadVitBackbone(dir: string): VitKeyBackbone {
    const configPath = path.join(dir, "config.json");
    const weightsPath = path.join(dir, "weights.json");
    if (!fs.existsSync(configPath) || !fs.existsSync(weightsPath)) {
        throw new ModelLoadError(
            `backbone weights not found under ${dir} (need config.json and weights.json)`,
        );
    }
    let cfg: VitConfig;
    let raw: Record<string, { shape: number[]; data: string }>;
    try {
        cfg = JSON.parse(fs.readFileSync(configPath, "utf8"));
        raw = JSON.parse(fs.readFileSync(weightsPath, "utf8"));
    } catch (err) {
        throw new ModelLoadError(`cannot parse backbone files under ${dir}: ${err}`);
    }
    const tensors: TensorMap = new Map();
    for (const [name, spec] of Object.entries(raw)) {
        const buf = Buffer.from(spec.data, "base64");
        const values = new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
        tensors.set(name, tf.tensor(Array.from(values), spec.shape));
    }
    return new VitKeyBackbone(cfg, tensors, `vit(${path.basename(dir)})`);
}

/** Deterministic PRNG so generated test weights are reproducible. */
function mulberry32(seed: number): () => number {
    let a = seed >>> 0;
    return () => {
        a |= 0;
        a = (a + 0x6d2b79f5) | 0;
        let t = Math.imul(a ^ (a >>> 15), 1 | a);
        t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
}

/**
 * Randomly initialized weights in the on-disk schema. NOT a pretrained
 * model: the features are deterministic but carry no semantics. Used for
 * smoke runs and tests of the export machinery.
 */
export function randomVitWeights(
    cfg: VitConfig,
    seed: number,
): Record<string, { shape: number[]; data: string }> {
    const rand = mulberry32(seed);
    const gauss = () => {
        // Box-Muller on the seeded uniform stream
        const u = Math.max(rand(), 1e-12);
        const v = rand();
        return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
    };
    const make = (shape: number[], scale: number) => {
        const n = shape.reduce((a, b) => a * b, 1);
        const values = new Float32Array(n);
        for (let i = 0; i < n; i++) values[i] = gauss() * scale;
        return { shape, data: Buffer.from(values.buffer).toString("base64") };
    };
    const ones = (shape: number[]) => {
        const n = shape.reduce((a, b) => a * b, 1);
        const values = new Float32Array(n).fill(1);
        return { shape, data: Buffer.from(values.buffer).toString("base64") };
    };
    const c = cfg.embed_dim;
    const p = cfg.patch_size;
    const hidden = Math.round(c * (cfg.mlp_ratio ?? 4));
    const [gr, gc] = cfg.pos_grid;
    const out: Record<string, { shape: number[]; data: string }> = {
        "patch_embed.weight": make([c, p * p * 3], 0.05),
        "patch_embed.bias": make([c], 0.01),
        cls_token: make([c], 0.02),
        pos_embed: make([1 + gr * gc, c], 0.02),
    };
    for (let i = 0; i < cfg.depth; i++) {
        out[`blocks.${i}.norm1.weight`] = ones([c]);
        out[`blocks.${i}.norm1.bias`] = make([c], 0.01);
        out[`blocks.${i}.attn.qkv.weight`] = make([3 * c, c], 0.08);
        out[`blocks.${i}.attn.qkv.bias`] = make([3 * c], 0.01);
        out[`blocks.${i}.attn.proj.weight`] = make([c, c], 0.08);
        out[`blocks.${i}.attn.proj.bias`] = make([c], 0.01);
        out[`blocks.${i}.norm2.weight`] = ones([c]);
        out[`blocks.${i}.norm2.bias`] = make([c], 0.01);
        out[`blocks.${i}.mlp.fc1.weight`] = make([hidden, c], 0.08);
        out[`blocks.${i}.mlp.fc1.bias`] = make([hidden], 0.01);
        out[`blocks.${i}.mlp.fc2.weight`] = make([c, hidden], 0.08);
        out[`blocks.${i}.mlp.fc2.bias`] = make([c], 0.01);
    }
    return out;
}

export function writeVitWeights(
    dir: string,
    cfg: VitConfig,
    weights: Record<string, { shape: number[]; data: string }>,
): void {
    fs.mkdirSync(dir, { recursive: true });
    fs.writeFileSync(path.join(dir, "config.json"), JSON.stringify(cfg, null, 2));
    fs.writeFileSync(path.join(dir, "weights.json"), JSON.stringify(weights));
}

/** The production configuration: ViT-Base, 8px patches, 768-dim keys. */
export const VIT_BASE_8: VitConfig = {
    embed_dim: 768,
    depth: 12,
    num_heads: 12,
    patch_size: 8,
    mlp_ratio: 4,
    pos_grid: [28, 28],
};
