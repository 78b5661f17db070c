// What-if comparison of two itineraries: set overlap plus order annotations.

export interface TripComparison {
    shared: Set<string>;
    onlyA: Set<string>;
    onlyB: Set<string>;
    // Shared POIs participating in at least one POI pair whose relative
    // order flips between the two trips (the pair logic the ordered-pairs
    // F1 metric uses).
    orderChanged: Set<string>;
}

export function compareTrips(a: readonly string[], b: readonly string[]): TripComparison {
    const setA = new Set(a);
    const setB = new Set(b);
    const shared = new Set([...setA].filter((p) => setB.has(p)));
    const onlyA = new Set([...setA].filter((p) => !setB.has(p)));
    const onlyB = new Set([...setB].filter((p) => !setA.has(p)));

    const posA = positions(a);
    const posB = positions(b);
    const orderChanged = new Set<string>();
    const sharedList = [...shared];
    for (let i = 0; i < sharedList.length; i++) {
        for (let j = i + 1; j < sharedList.length; j++) {
            const p = sharedList[i]!;
            const q = sharedList[j]!;
            const forwardA = posA.get(p)! < posA.get(q)!;
            const forwardB = posB.get(p)! < posB.get(q)!;
            if (forwardA !== forwardB) {
                orderChanged.add(p);
                orderChanged.add(q);
            }
        }
    }
    return { shared, onlyA, onlyB, orderChanged };
}

function positions(trip: readonly string[]): Map<string, number> {
    const map = new Map<string, number>();
    trip.forEach((poi, index) => {
        if (!map.has(poi)) {
            map.set(poi, index);
        }
    });
    return map;
}
