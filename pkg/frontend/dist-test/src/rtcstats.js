// Extraction of the active candidate-pair round-trip time from a
// getStats() report set. Kept free of browser types so the selection
// logic is testable on fixture data.
/**
 * Pick the current RTT in milliseconds, or null when no usable pair
 * exists yet. Preference order: the pair referenced by a transport's
 * selectedCandidatePairId, then a selected/nominated succeeded pair,
 * then any succeeded pair reporting a round-trip time.
 */
export function pickCandidatePairRttMs(reports) {
    const all = [...reports];
    const pairs = all.filter((r) => r.type === "candidate-pair");
    const selectedIds = new Set(all
        .filter((r) => r.type === "transport" && typeof r.selectedCandidatePairId === "string")
        .map((r) => r.selectedCandidatePairId));
    const usable = (pair) => typeof pair.currentRoundTripTime === "number" && pair.currentRoundTripTime >= 0;
    const bySelection = pairs.find((p) => p.id !== undefined && selectedIds.has(p.id) && usable(p));
    if (bySelection)
        return bySelection.currentRoundTripTime * 1000;
    const byFlag = pairs.find((p) => p.state === "succeeded" && (p.selected === true || p.nominated === true) && usable(p));
    if (byFlag)
        return byFlag.currentRoundTripTime * 1000;
    const anySucceeded = pairs.find((p) => p.state === "succeeded" && usable(p));
    if (anySucceeded)
        return anySucceeded.currentRoundTripTime * 1000;
    return null;
}
