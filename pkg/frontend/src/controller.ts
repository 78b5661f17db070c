import { Query, RecommendResponse } from "./types.js";

// The slice of the API client the controller needs; anything with a
// recommend method works, which keeps the sequencing logic testable.
export interface RecommendApi {
    recommend(query: Query): Promise<RecommendResponse>;
}

// At most one submission counts at a time. Every submit takes a fresh
// sequence number; a response (or failure) whose number has been superseded
// by a newer submit resolves to null and must not reach the UI.
export class RecommendController {
    private seq = 0;
    private active: number | null = null;

    constructor(private readonly client: RecommendApi) {}

    get inFlight(): boolean {
        return this.active !== null;
    }

    async submit(query: Query): Promise<RecommendResponse | null> {
        const token = ++this.seq;
        this.active = token;
        try {
            const response = await this.client.recommend(query);
            if (token !== this.seq) {
                return null;
            }
            this.active = null;
            return response;
        } catch (err) {
            if (token !== this.seq) {
                return null;
            }
            this.active = null;
            throw err;
        }
    }
}
