import { describe, expect, it } from "vitest";

import { layoutTrip } from "../src/plot.js";
import { Poi } from "../src/types.js";

function poiMap(pois: Poi[]): Map<string, Poi> {
    return new Map(pois.map((p) => [p.id, p]));
}

const GRID = poiMap([
    { id: "west", lon: 135.0, lat: 34.5 },
    { id: "east", lon: 135.4, lat: 34.5 },
    { id: "north", lon: 135.2, lat: 34.9 },
    { id: "south", lon: 135.2, lat: 34.1 },
]);

describe("layoutTrip", () => {
    it("produces one point per stop in sequence order", () => {
        const layout = layoutTrip(["west", "north", "east"], GRID);
        expect(layout.points.map((p) => p.id)).toEqual(["west", "north", "east"]);
        expect(layout.points.map((p) => p.seq)).toEqual([1, 2, 3]);
        expect(layout.polyline.split(" ")).toHaveLength(3);
    });

    it("keeps every point inside the padded frame", () => {
        const layout = layoutTrip(["west", "east", "north", "south"], GRID, 400, 300, 20);
        for (const point of layout.points) {
            expect(point.x).toBeGreaterThanOrEqual(20);
            expect(point.x).toBeLessThanOrEqual(380);
            expect(point.y).toBeGreaterThanOrEqual(20);
            expect(point.y).toBeLessThanOrEqual(280);
        }
        expect(layout.width).toBe(400);
        expect(layout.height).toBe(300);
    });

    it("maps longitude left-to-right and latitude north-up", () => {
        const layout = layoutTrip(["west", "east", "north", "south"], GRID);
        const at = new Map(layout.points.map((p) => [p.id, p]));
        expect(at.get("west")!.x).toBeLessThan(at.get("east")!.x);
        // SVG y grows downward, so the northern POI gets the smaller y.
        expect(at.get("north")!.y).toBeLessThan(at.get("south")!.y);
    });

    it("centers a degenerate span instead of dividing by zero", () => {
        const line = poiMap([
            { id: "a", lon: 135.2, lat: 34.0 },
            { id: "b", lon: 135.2, lat: 34.6 },
        ]);
        const layout = layoutTrip(["a", "b"], line, 420, 300, 24);
        const xs = layout.points.map((p) => p.x);
        expect(xs[0]).toBe(xs[1]);
        expect(xs[0]).toBe(210);
        expect(layout.points[0]!.y).not.toBe(layout.points[1]!.y);
        for (const point of layout.points) {
            expect(Number.isFinite(point.x)).toBe(true);
            expect(Number.isFinite(point.y)).toBe(true);
        }
    });

    it("rejects stops missing from the POI catalogue", () => {
        expect(() => layoutTrip(["west", "nowhere"], GRID)).toThrow(/nowhere/);
    });

    it("lays out a single-stop trip without NaNs", () => {
        const layout = layoutTrip(["west"], GRID);
        expect(layout.points).toHaveLength(1);
        expect(Number.isFinite(layout.points[0]!.x)).toBe(true);
        expect(Number.isFinite(layout.points[0]!.y)).toBe(true);
    });
});
