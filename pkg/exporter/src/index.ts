export { decodeNpy, encodeNpy, readNpy, writeNpy, type NpyArray, type NpyDtype } from "./npy.js";
export {
    decodePngRgb,
    encodePngRgb,
    readImage,
    resizeBilinear,
    toGray,
    writeImage,
    type RgbImage,
} from "./image.js";
export { pairFrames } from "./pairing.js";
export { flowToRgb, makeColorwheel, type FlowField } from "./colorwheel.js";
export { HornSchunckFlow, PrecomputedFlow, type FlowBackend } from "./flow.js";
export {
    loadVitBackbone,
    ModelLoadError,
    randomVitWeights,
    VitKeyBackbone,
    VIT_BASE_8,
    writeVitWeights,
    type Backbone,
    type PatchFeatures,
    type VitConfig,
} from "./backbone.js";
export { exportFeatures, listSequences, type ExportJob } from "./export.js";
