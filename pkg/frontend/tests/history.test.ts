import { describe, expect, it } from "vitest";

import { History } from "../src/history.js";
import { Query } from "../src/types.js";

const QUERY: Query = {
    start_poi: "p00",
    start_hour: 9,
    end_poi: "p05",
    end_hour: 18,
    n: 3,
};

describe("History", () => {
    it("assigns increasing ids in append order", () => {
        const history = new History();
        const a = history.append(QUERY, ["p00", "p02", "p05"]);
        const b = history.append(QUERY, ["p00", "p03", "p05"]);
        expect(b.id).toBeGreaterThan(a.id);
        expect(history.length).toBe(2);
        expect(history.all().map((e) => e.id)).toEqual([a.id, b.id]);
    });

    it("looks entries up by id", () => {
        const history = new History();
        const entry = history.append(QUERY, ["p00", "p05"]);
        expect(history.get(entry.id)).toEqual(entry);
        expect(history.get(entry.id + 999)).toBeUndefined();
    });

    it("stores defensive copies of the query and trip", () => {
        const history = new History();
        const mutableQuery = { ...QUERY };
        const mutableTrip = ["p00", "p02", "p05"];
        const entry = history.append(mutableQuery, mutableTrip);

        mutableQuery.n = 99;
        mutableTrip.push("p09");

        expect(entry.query.n).toBe(3);
        expect(entry.trip).toEqual(["p00", "p02", "p05"]);
    });

    it("reflects later appends through all()", () => {
        const history = new History();
        expect(history.all()).toHaveLength(0);
        history.append(QUERY, ["p00", "p05"]);
        history.append(QUERY, ["p00", "p02", "p05"]);
        expect(history.all().map((e) => [...e.trip])).toEqual([
            ["p00", "p05"],
            ["p00", "p02", "p05"],
        ]);
    });
});
