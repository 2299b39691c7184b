/**
 * Export job: turn raw frames into the dataset layout the segmentation
 * pipeline consumes. Per frame it writes the appearance feature grid, the
 * flow field, the flow rendered as a color-wheel image, and the feature grid
 * of that flow image through the same backbone; pairing follows the
 * forward-then-backward rule. A dataset.toml and a metadata sidecar record
 * the geometry and the model identities.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import type { Backbone, PatchFeatures } from "./backbone.js";
import { flowToRgb } from "./colorwheel.js";
import type { FlowBackend } from "./flow.js";
import { readImage, resizeBilinear, writeImage, type RgbImage } from "./image.js";
import { writeNpy } from "./npy.js";
import { pairFrames } from "./pairing.js";

export interface ExportJob {
    datasetRoot: string;
    outRoot: string;
    backbone: Backbone;
    flowBackend: FlowBackend;
    resizeHeight: number;
    resizeWidth: number;
    averagingMode: "sequence_average" | "frame_average";
}

const FRAME_EXTENSIONS = [".jpg", ".jpeg", ".png", ".ppm"];

export function listSequences(framesRoot: string): Map<string, string[]> {
    if (!fs.existsSync(framesRoot)) {
        throw new Error(`no frames directory at ${framesRoot}`);
    }
    const sequences = new Map<string, string[]>();
    for (const entry of fs.readdirSync(framesRoot).sort()) {
        const seqDir = path.join(framesRoot, entry);
        if (!fs.statSync(seqDir).isDirectory()) continue;
        const frames = fs
            .readdirSync(seqDir)
            .filter((f: string) => FRAME_EXTENSIONS.includes(path.extname(f).toLowerCase()))
            .sort();
        if (frames.length > 0) sequences.set(entry, frames);
    }
    if (sequences.size === 0) {
        throw new Error(`no image sequences under ${framesRoot}`);
    }
    return sequences;
}

function featuresToNpy(file: string, features: PatchFeatures): void {
    writeNpy(file, {
        dtype: "<f4",
        shape: [features.rows, features.cols, features.channels],
        data: features.data,
    });
}

export function exportFeatures(job: ExportJob): { frames: number; sequences: number } {
    const p = job.backbone.patchSize;
    if (job.resizeHeight % p !== 0 || job.resizeWidth % p !== 0) {
        throw new Error(
            `resize resolution ${job.resizeHeight}x${job.resizeWidth} must be a ` +
                `multiple of the backbone patch size ${p}`,
        );
    }
    const sequences = listSequences(path.join(job.datasetRoot, "frames"));
    const out = job.outRoot;
    let frameCount = 0;

    for (const [seq, files] of sequences) {
        const stems = files.map((f) => path.basename(f, path.extname(f)));
        const byStem = new Map(stems.map((s, i) => [s, files[i]]));
        const resized = new Map<string, RgbImage>();
        const load = (stem: string): RgbImage => {
            let img = resized.get(stem);
            if (!img) {
                const file = path.join(job.datasetRoot, "frames", seq, byStem.get(stem)!);
                img = resizeBilinear(readImage(file), job.resizeHeight, job.resizeWidth);
                resized.set(stem, img);
            }
            return img;
        };

        for (const [src, dst] of pairFrames(stems)) {
            const srcImg = load(src);
            const flow = job.flowBackend.compute(srcImg, load(dst), seq, src);

            const interleaved = new Float32Array(flow.height * flow.width * 2);
            for (let i = 0; i < flow.height * flow.width; i++) {
                interleaved[i * 2] = flow.u[i];
                interleaved[i * 2 + 1] = flow.v[i];
            }
            writeNpy(path.join(out, "flow", seq, `${src}.npy`), {
                dtype: "<f4",
                shape: [flow.height, flow.width, 2],
                data: interleaved,
            });

            const flowImage = flowToRgb(flow);
            writeImage(path.join(out, "flow_rgb", seq, `${src}.png`), flowImage);

            featuresToNpy(
                path.join(out, "feat_app", seq, `${src}.npy`),
                job.backbone.keyFeatures(srcImg),
            );
            featuresToNpy(
                path.join(out, "feat_flow", seq, `${src}.npy`),
                job.backbone.keyFeatures(flowImage),
            );
            frameCount++;
        }
    }

    fs.mkdirSync(out, { recursive: true });
    fs.writeFileSync(
        path.join(out, "dataset.toml"),
        `averaging_mode = "${job.averagingMode}"\n` +
            `patch_size = ${p}\n` +
            `image_height = ${job.resizeHeight}\n` +
            `image_width = ${job.resizeWidth}\n`,
    );
    fs.writeFileSync(
        path.join(out, "export_meta.json"),
        JSON.stringify(
            {
                backbone: job.backbone.id,
                channels: job.backbone.channels,
                flow_backend: job.flowBackend.id,
                resize: [job.resizeHeight, job.resizeWidth],
                source: job.datasetRoot,
            },
            null,
            2,
        ),
    );
    return { frames: frameCount, sequences: sequences.size };
}
