// Wire types shared with the HTTP API.

export interface Poi {
    id: string;
    lon: number;
    lat: number;
}

// The travel demand quintuple the server recommends against.
export interface Query {
    start_poi: string;
    start_hour: number;
    end_poi: string;
    end_hour: number;
    n: number;
}

export interface RecommendResponse {
    trip: string[];
    poi_details: Poi[];
    model_version: string;
}
