import { Query } from "./types.js";

export type QueryField = "start_poi" | "end_poi" | "start_hour" | "end_hour" | "n";

export type FieldErrors = Partial<Record<QueryField, string>>;

// Client-side mirror of the server's query rules, so that every form this
// module accepts is accepted by the server too: distinct endpoints, integer
// hours in 0..23, and 2 <= n <= number of known POIs.
export function validateQuery(query: Query, poiCount: number): FieldErrors {
    const errors: FieldErrors = {};
    if (!query.start_poi) {
        errors.start_poi = "choose a start POI";
    }
    if (!query.end_poi) {
        errors.end_poi = "choose an end POI";
    } else if (query.start_poi && query.start_poi === query.end_poi) {
        errors.end_poi = "start and end POI must differ";
    }
    for (const field of ["start_hour", "end_hour"] as const) {
        const hour = query[field];
        if (!Number.isInteger(hour) || hour < 0 || hour > 23) {
            errors[field] = "hour must be an integer in 0..23";
        }
    }
    if (!Number.isInteger(query.n) || query.n < 2) {
        errors.n = "n must be an integer >= 2";
    } else if (poiCount > 0 && query.n > poiCount) {
        errors.n = `n must be at most ${poiCount}, the number of known POIs`;
    }
    return errors;
}

export function isValid(errors: FieldErrors): boolean {
    return Object.keys(errors).length === 0;
}
