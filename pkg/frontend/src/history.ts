import { Query } from "./types.js";

export interface HistoryEntry {
    readonly id: number;
    readonly query: Readonly<Query>;
    readonly trip: readonly string[];
}

// Append-only in-session record of successful recommendations. Entries are
// defensive copies: later UI state can never rewrite what was recommended.
export class History {
    private entries: HistoryEntry[] = [];
    private nextId = 1;

    append(query: Readonly<Query>, trip: readonly string[]): HistoryEntry {
        const entry: HistoryEntry = {
            id: this.nextId++,
            query: { ...query },
            trip: [...trip],
        };
        this.entries.push(entry);
        return entry;
    }

    all(): readonly HistoryEntry[] {
        return this.entries;
    }

    get(id: number): HistoryEntry | undefined {
        return this.entries.find((entry) => entry.id === id);
    }

    get length(): number {
        return this.entries.length;
    }
}
