import { describe, expect, it } from "vitest";

import { Query } from "../src/types.js";
import { isValid, validateQuery } from "../src/validate.js";

const POI_COUNT = 8;

function query(overrides: Partial<Query> = {}): Query {
    return {
        start_poi: "p00",
        start_hour: 9,
        end_poi: "p05",
        end_hour: 18,
        n: 3,
        ...overrides,
    };
}

describe("validateQuery", () => {
    it("accepts a well-formed query", () => {
        expect(validateQuery(query(), POI_COUNT)).toEqual({});
    });

    it("rejects missing endpoint selections", () => {
        const errors = validateQuery(query({ start_poi: "", end_poi: "" }), POI_COUNT);
        expect(errors.start_poi).toBeTruthy();
        expect(errors.end_poi).toBeTruthy();
    });

    it("rejects equal endpoints on the end field", () => {
        const errors = validateQuery(query({ end_poi: "p00" }), POI_COUNT);
        expect(errors.end_poi).toMatch(/differ/);
        expect(errors.start_poi).toBeUndefined();
    });

    it.each([-1, 24, 9.5, Number.NaN])("rejects start hour %s", (hour) => {
        const errors = validateQuery(query({ start_hour: hour }), POI_COUNT);
        expect(errors.start_hour).toMatch(/0\.\.23/);
    });

    it.each([-1, 24, 17.25])("rejects end hour %s", (hour) => {
        const errors = validateQuery(query({ end_hour: hour }), POI_COUNT);
        expect(errors.end_hour).toMatch(/0\.\.23/);
    });

    it("accepts boundary hours 0 and 23", () => {
        expect(validateQuery(query({ start_hour: 0, end_hour: 23 }), POI_COUNT)).toEqual({});
    });

    it.each([0, 1, 2.5, Number.NaN])("rejects n %s", (n) => {
        const errors = validateQuery(query({ n }), POI_COUNT);
        expect(errors.n).toBeTruthy();
    });

    it("caps n at the number of known POIs", () => {
        expect(validateQuery(query({ n: POI_COUNT }), POI_COUNT)).toEqual({});
        const errors = validateQuery(query({ n: POI_COUNT + 1 }), POI_COUNT);
        expect(errors.n).toMatch(/at most/);
    });

    it("leaves the POI cap unchecked before the list loads", () => {
        expect(validateQuery(query({ n: 50 }), 0)).toEqual({});
    });

    // Every client-accepted form satisfies the server's query invariants.
    it("only accepts forms the server would accept", () => {
        const pois = ["", "p00", "p05"];
        const hours = [-1, 0, 9, 23, 24, 7.5];
        const ns = [0, 2, 8, 9];
        for (const start_poi of pois) {
            for (const end_poi of pois) {
                for (const start_hour of hours) {
                    for (const end_hour of hours) {
                        for (const n of ns) {
                            const q = { start_poi, end_poi, start_hour, end_hour, n };
                            if (!isValid(validateQuery(q, POI_COUNT))) {
                                continue;
                            }
                            expect(q.start_poi).not.toBe("");
                            expect(q.end_poi).not.toBe("");
                            expect(q.start_poi).not.toBe(q.end_poi);
                            for (const hour of [q.start_hour, q.end_hour]) {
                                expect(Number.isInteger(hour)).toBe(true);
                                expect(hour).toBeGreaterThanOrEqual(0);
                                expect(hour).toBeLessThanOrEqual(23);
                            }
                            expect(Number.isInteger(q.n)).toBe(true);
                            expect(q.n).toBeGreaterThanOrEqual(2);
                            expect(q.n).toBeLessThanOrEqual(POI_COUNT);
                        }
                    }
                }
            }
        }
    });
});
