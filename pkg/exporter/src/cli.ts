/**
 * CLI for the feature exporter.
 *
 *   flowcut-export --dataset <dir> --out <dir> --weights <dir>
 *                  [--height 480 --width 848]
 *                  [--flow hornschunck | --flow precomputed:<dir>]
 *                  [--averaging sequence_average|frame_average]
 *                  [--random-weights-seed N]   # testing backbone, no semantics
 *
 * Exit codes: 0 ok, 1 model load failure or export error, 2 bad usage.
 */

import { parseArgs } from "node:util";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import {
    loadVitBackbone,
    ModelLoadError,
    randomVitWeights,
    writeVitWeights,
    VIT_BASE_8,
    type VitConfig,
} from "./backbone.js";
import { exportFeatures } from "./export.js";
import { HornSchunckFlow, PrecomputedFlow, type FlowBackend } from "./flow.js";

function buildFlowBackend(spec: string): FlowBackend {
    if (spec === "hornschunck") return new HornSchunckFlow();
    if (spec.startsWith("precomputed:")) {
        return new PrecomputedFlow(spec.slice("precomputed:".length));
    }
    throw new Error(`unknown flow backend ${spec}; use hornschunck or precomputed:<dir>`);
}

export function main(argv: string[]): number {
    let args: ReturnType<typeof parseArgs>;
    try {
        args = parseArgs({
            args: argv ?? [],
            options: {
                dataset: { type: "string" },
                out: { type: "string" },
                weights: { type: "string" },
                height: { type: "string", default: "480" },
                width: { type: "string", default: "848" },
                flow: { type: "string", default: "hornschunck" },
                averaging: { type: "string", default: "sequence_average" },
                "random-weights-seed": { type: "string" },
                help: { type: "boolean", default: false },
            },
        });
    } catch (err) {
        console.error(String(err));
        return 2;
    }
    const v = args.values as Record<string, string | boolean | undefined>;
    if (v.help) {
        console.log((module_doc ?? "").trim());
        return 0;
    }
    if (!v.dataset || !v.out) {
        console.error("--dataset and --out are required");
        return 2;
    }
    if (!v.weights && v["random-weights-seed"] === undefined) {
        console.error("--weights <dir> is required (or --random-weights-seed for smoke runs)");
        return 2;
    }
    const mode = String(v.averaging);
    if (mode !== "sequence_average" && mode !== "frame_average") {
        console.error(`--averaging must be sequence_average or frame_average, got ${mode}`);
        return 2;
    }

    try {
        let weightsDir = v.weights as string | undefined;
        if (!weightsDir) {
            // Deterministic random backbone for machinery smoke-tests only.
            const seed = Number.parseInt(String(v["random-weights-seed"]), 10);
            const cfg: VitConfig = {
                embed_dim: 32,
                depth: 2,
                num_heads: 4,
                patch_size: 8,
                mlp_ratio: 2,
                pos_grid: [8, 8],
            };
            weightsDir = fs.mkdtempSync(path.join(os.tmpdir(), "vit-random-"));
            writeVitWeights(weightsDir, cfg, randomVitWeights(cfg, seed));
            console.error(
                `warning: using randomly initialized backbone (seed ${seed}); ` +
                    "features carry no semantics",
            );
        }
        const backbone = loadVitBackbone(weightsDir);
        const result = exportFeatures({
            datasetRoot: String(v.dataset),
            outRoot: String(v.out),
            backbone,
            flowBackend: buildFlowBackend(String(v.flow)),
            resizeHeight: Number.parseInt(String(v.height), 10),
            resizeWidth: Number.parseInt(String(v.width), 10),
            averagingMode: mode,
        });
        console.log(
            `exported ${result.frames} frames across ${result.sequences} sequences -> ${v.out}`,
        );
        return 0;
    } catch (err) {
        if (err instanceof ModelLoadError) {
            console.error(`model load failure: ${err.message}`);
        } else {
            console.error(String(err instanceof Error ? err.message : err));
        }
        return 1;
    }
}

const module_doc = `
flowcut-export: extract ViT key features and optical flow into the
segmentation pipeline's dataset layout.

  --dataset <dir>    directory with frames/<sequence>/<frame>.{jpg,png,ppm}
  --out <dir>        output dataset root (feat_app/, feat_flow/, flow/,
                     flow_rgb/, dataset.toml, export_meta.json)
  --weights <dir>    ViT backbone weights (config.json + weights.json);
                     the production config is ViT-Base with 8px patches
  --height/--width   working resolution (default 480x848), must be a
                     multiple of the patch size
  --flow <spec>      hornschunck (built-in, classical) or precomputed:<dir>
                     with (H,W,2) float32 arrays from an external model
  --averaging        sequence_average | frame_average (written to dataset.toml)
  --random-weights-seed N   tiny seeded backbone for smoke runs (no weights)
`;

export { VIT_BASE_8 };

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
    process.exit(main(process.argv.slice(2)));
}
