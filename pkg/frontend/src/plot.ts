import { Poi } from "./types.js";

export interface PlotPoint {
    id: string;
    x: number;
    y: number;
    seq: number;
}

export interface PlotLayout {
    points: PlotPoint[];
    polyline: string;
    width: number;
    height: number;
}

// Scale raw lon/lat into SVG coordinates: linear fit with padding, y axis
// flipped so north points up, degenerate extents centered. No map tiles —
// the plot works fully offline against the service.
export function layoutTrip(
    trip: readonly string[],
    pois: Map<string, Poi>,
    width = 420,
    height = 300,
    pad = 24,
): PlotLayout {
    const detail = trip.map((id) => {
        const poi = pois.get(id);
        if (!poi) {
            throw new Error(`unknown POI ${id}`);
        }
        return poi;
    });
    const lons = detail.map((p) => p.lon);
    const lats = detail.map((p) => p.lat);
    const sx = scaler(Math.min(...lons), Math.max(...lons), pad, width - pad);
    const sy = scaler(Math.min(...lats), Math.max(...lats), pad, height - pad);
    const points = detail.map((p, i) => ({
        id: p.id,
        x: sx(p.lon),
        y: height - sy(p.lat),
        seq: i + 1,
    }));
    const polyline = points.map((p) => `${p.x},${p.y}`).join(" ");
    return { points, polyline, width, height };
}

function scaler(min: number, max: number, lo: number, hi: number): (v: number) => number {
    const span = max - min;
    if (span === 0) {
        return () => (lo + hi) / 2;
    }
    return (v) => lo + ((v - min) / span) * (hi - lo);
}
