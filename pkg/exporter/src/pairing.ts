/** Flow frame pairing: forward pairs, with the last frame paired backward. */

export function pairFrames(frameIds: string[]): Array<[string, string]> {
    if (frameIds.length < 2) {
        throw new Error(`need at least 2 frames to pair, got ${frameIds.length}`);
    }
    const pairs: Array<[string, string]> = [];
    for (let i = 0; i + 1 < frameIds.length; i++) {
        pairs.push([frameIds[i], frameIds[i + 1]]);
    }
    pairs.push([frameIds[frameIds.length - 1], frameIds[frameIds.length - 2]]);
    return pairs;
}
