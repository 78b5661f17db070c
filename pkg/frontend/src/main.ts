import { ApiClient, ApiError } from "./api.js";
import { compareTrips } from "./compare.js";
import { RecommendController } from "./controller.js";
import { History, HistoryEntry } from "./history.js";
import { layoutTrip } from "./plot.js";
import { Poi, Query } from "./types.js";
import { FieldErrors, isValid, QueryField, validateQuery } from "./validate.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const $ = <T extends HTMLElement>(id: string): T => {
    const el = document.getElementById(id);
    if (!el) {
        throw new Error(`missing element #${id}`);
    }
    return el as T;
};

const client = new ApiClient(defaultBaseUrl());
const controller = new RecommendController(client);
const history = new History();
let pois = new Map<string, Poi>();

function defaultBaseUrl(): string {
    return window.location.origin === "null" || window.location.protocol === "file:"
        ? "http://127.0.0.1:8000"
        : window.location.origin;
}

function readQuery(): Query {
    return {
        start_poi: $<HTMLSelectElement>("start-poi").value,
        end_poi: $<HTMLSelectElement>("end-poi").value,
        start_hour: Number($<HTMLInputElement>("start-hour").value),
        end_hour: Number($<HTMLInputElement>("end-hour").value),
        n: Number($<HTMLInputElement>("trip-n").value),
    };
}

function showFieldErrors(errors: FieldErrors): void {
    const fields: QueryField[] = ["start_poi", "end_poi", "start_hour", "end_hour", "n"];
    for (const field of fields) {
        const span = document.querySelector(`[data-error-for="${field}"]`);
        if (span) {
            span.textContent = errors[field] ?? "";
        }
    }
}

// Submit stays disabled unless the client-side mirror of the server's query
// rules accepts the form.
function refreshValidity(): FieldErrors {
    const errors = validateQuery(readQuery(), pois.size);
    showFieldErrors(errors);
    $<HTMLButtonElement>("submit").disabled = !isValid(errors);
    return errors;
}

function setStatus(text: string): void {
    $("status").textContent = text;
}

function showError(message: string, retry: boolean): void {
    const box = $("error-box");
    box.textContent = message;
    box.hidden = false;
    if (retry) {
        const button = document.createElement("button");
        button.type = "button";
        button.textContent = "Retry";
        button.addEventListener("click", () => {
            box.hidden = true;
            void submit();
        });
        box.append(" ", button);
    }
}

function clearError(): void {
    const box = $("error-box");
    box.hidden = true;
    box.textContent = "";
}

function describe(err: unknown): string {
    if (err instanceof ApiError) {
        return err.detail;
    }
    return err instanceof Error ? err.message : String(err);
}

// ------------------------------------------------------------------ loading

async function loadPois(): Promise<void> {
    setStatus("loading POIs…");
    try {
        const list = await client.getPois();
        pois = new Map(list.map((p) => [p.id, p]));
        for (const id of ["start-poi", "end-poi"]) {
            const select = $<HTMLSelectElement>(id);
            select.innerHTML = "";
            for (const poi of list) {
                const option = document.createElement("option");
                option.value = poi.id;
                option.textContent = poi.id;
                select.append(option);
            }
        }
        const n = $<HTMLInputElement>("trip-n");
        n.min = "2";
        n.max = String(list.length);
        if (list.length > 1) {
            $<HTMLSelectElement>("end-poi").selectedIndex = 1;
        }
        setStatus(`${list.length} POIs loaded from ${client.getBaseUrl()}`);
        clearError();
    } catch (err) {
        pois = new Map();
        setStatus("");
        showError(`could not load POIs from ${client.getBaseUrl()}: ${describe(err)}`, false);
    }
    refreshValidity();
}

// ---------------------------------------------------------------- rendering

function renderItinerary(trip: string[]): void {
    const list = $("itinerary-list");
    list.innerHTML = "";
    trip.forEach((poi, index) => {
        const item = document.createElement("li");
        item.textContent = `${index + 1}. ${poi}`;
        list.append(item);
    });
    renderPlot(trip);
}

function renderPlot(trip: string[]): void {
    const host = $("plot");
    host.innerHTML = "";
    const layout = layoutTrip(trip, pois);
    const svg = document.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${layout.width} ${layout.height}`);
    svg.setAttribute("width", String(layout.width));
    svg.setAttribute("height", String(layout.height));
    const line = document.createElementNS(SVG_NS, "polyline");
    line.setAttribute("points", layout.polyline);
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", "#2563eb");
    line.setAttribute("stroke-width", "2");
    svg.append(line);
    for (const point of layout.points) {
        const dot = document.createElementNS(SVG_NS, "circle");
        dot.setAttribute("cx", String(point.x));
        dot.setAttribute("cy", String(point.y));
        dot.setAttribute("r", "6");
        dot.setAttribute("fill", point.seq === 1 ? "#16a34a"
            : point.seq === layout.points.length ? "#dc2626" : "#2563eb");
        svg.append(dot);
        const label = document.createElementNS(SVG_NS, "text");
        label.setAttribute("x", String(point.x + 8));
        label.setAttribute("y", String(point.y - 8));
        label.setAttribute("font-size", "11");
        label.textContent = `${point.seq} ${point.id}`;
        svg.append(label);
    }
    host.append(svg);
}

function queryLabel(query: Query): string {
    return `${query.start_poi}@${query.start_hour}h → ${query.end_poi}@${query.end_hour}h, n=${query.n}`;
}

function renderHistory(): void {
    const list = $("history-list");
    list.innerHTML = "";
    for (const entry of history.all()) {
        const item = document.createElement("li");
        const box = document.createElement("input");
        box.type = "checkbox";
        box.value = String(entry.id);
        box.addEventListener("change", refreshCompareButton);
        const text = document.createElement("span");
        text.textContent = ` #${entry.id} ${queryLabel(entry.query)}: ${entry.trip.join(" → ")}`;
        item.append(box, text);
        list.append(item);
    }
    refreshCompareButton();
}

function selectedEntries(): HistoryEntry[] {
    const boxes = document.querySelectorAll<HTMLInputElement>("#history-list input:checked");
    const entries: HistoryEntry[] = [];
    boxes.forEach((box) => {
        const entry = history.get(Number(box.value));
        if (entry) {
            entries.push(entry);
        }
    });
    return entries;
}

function refreshCompareButton(): void {
    $<HTMLButtonElement>("compare").disabled = selectedEntries().length < 2;
}

function renderComparison(a: HistoryEntry, b: HistoryEntry): void {
    const diff = compareTrips(a.trip, b.trip);
    const host = $("compare-view");
    host.innerHTML = "";
    const caption = document.createElement("p");
    caption.textContent = `#${a.id} vs #${b.id}: ${diff.shared.size} shared POIs, `
        + `${diff.onlyA.size}/${diff.onlyB.size} unique, `
        + `${diff.orderChanged.size} with order differences`;
    host.append(caption);
    const columns = document.createElement("div");
    columns.className = "columns";
    for (const entry of [a, b]) {
        const column = document.createElement("div");
        const title = document.createElement("h3");
        title.textContent = `#${entry.id} ${queryLabel(entry.query)}`;
        column.append(title);
        const list = document.createElement("ol");
        for (const poi of entry.trip) {
            const item = document.createElement("li");
            item.textContent = poi;
            item.className = diff.shared.has(poi) ? "shared" : "unique";
            if (diff.orderChanged.has(poi)) {
                item.textContent += " (order differs)";
                item.classList.add("order-changed");
            }
            list.append(item);
        }
        column.append(list);
        columns.append(column);
    }
    host.append(columns);
    host.hidden = false;
}

// ------------------------------------------------------------------- submit

async function submit(): Promise<void> {
    const errors = refreshValidity();
    if (!isValid(errors)) {
        return;
    }
    const query = readQuery();
    clearError();
    setStatus("requesting itinerary…");
    try {
        const response = await controller.submit(query);
        if (response === null) {
            return; // superseded by a newer submission
        }
        setStatus(`model ${response.model_version}`);
        renderItinerary(response.trip);
        history.append(query, response.trip);
        renderHistory();
    } catch (err) {
        setStatus("");
        if (err instanceof ApiError) {
            // 422 = infeasible request, other 4xx = field-level rejection;
            // neither touches the history.
            showError(err.status === 422
                ? `infeasible request: ${err.detail}`
                : err.detail, false);
        } else {
            showError(`request failed: ${describe(err)}`, true);
        }
    }
}

function wire(): void {
    $<HTMLInputElement>("base-url").value = client.getBaseUrl();
    $("apply-base-url").addEventListener("click", () => {
        client.setBaseUrl($<HTMLInputElement>("base-url").value);
        void loadPois();
    });
    $("query-form").addEventListener("submit", (event) => {
        event.preventDefault();
        void submit();
    });
    $("query-form").addEventListener("input", refreshValidity);
    $("compare").addEventListener("click", () => {
        const picked = selectedEntries();
        if (picked.length >= 2) {
            renderComparison(picked[0]!, picked[1]!);
        }
    });
    void loadPois();
}

if (typeof document !== "undefined") {
    wire();
}
