import { Poi, Query, RecommendResponse } from "./types.js";

// Non-2xx responses carry the server's human-readable `detail` string.
export class ApiError extends Error {
    constructor(readonly status: number, readonly detail: string) {
        super(`HTTP ${status}: ${detail}`);
        this.name = "ApiError";
    }
}

export function normalizeBaseUrl(url: string): string {
    return url.trim().replace(/\/+$/, "");
}

async function errorDetail(resp: Response): Promise<string> {
    try {
        const body: unknown = await resp.json();
        if (body && typeof body === "object" && "detail" in body
            && typeof (body as { detail: unknown }).detail === "string") {
            return (body as { detail: string }).detail;
        }
        return JSON.stringify(body);
    } catch {
        return resp.statusText || `status ${resp.status}`;
    }
}

// Thin typed client for the recommendation service; the base URL is
// user-configurable so the page can point at any running instance.
export class ApiClient {
    private baseUrl: string;

    constructor(baseUrl: string) {
        this.baseUrl = normalizeBaseUrl(baseUrl);
    }

    setBaseUrl(url: string): void {
        this.baseUrl = normalizeBaseUrl(url);
    }

    getBaseUrl(): string {
        return this.baseUrl;
    }

    async getPois(): Promise<Poi[]> {
        const resp = await fetch(`${this.baseUrl}/pois`);
        if (!resp.ok) {
            throw new ApiError(resp.status, await errorDetail(resp));
        }
        return resp.json() as Promise<Poi[]>;
    }

    async recommend(query: Query): Promise<RecommendResponse> {
        const resp = await fetch(`${this.baseUrl}/recommend`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(query),
        });
        if (!resp.ok) {
            throw new ApiError(resp.status, await errorDetail(resp));
        }
        return resp.json() as Promise<RecommendResponse>;
    }
}
