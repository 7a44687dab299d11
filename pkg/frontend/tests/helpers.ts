import type { ReviewTask } from "../src/types.js";

export interface FakeCall {
  url: string;
  method: string;
  body: unknown;
}

export interface FakeRoute {
  match: (url: string, method: string) => boolean;
  respond: (body: unknown) => { status: number; payload: unknown };
}

/** Minimal fetch stand-in: routes requests and records every call. */
export function fakeFetch(routes: FakeRoute[], calls: FakeCall[]): typeof fetch {
  return (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    calls.push({ url, method, body });
    for (const route of routes) {
      if (route.match(url, method)) {
        const { status, payload } = route.respond(body);
        return new Response(JSON.stringify(payload), {
          status,
          headers: { "Content-Type": "application/json" },
        });
      }
    }
    return new Response(JSON.stringify({ detail: `no route for ${method} ${url}` }), {
      status: 500,
    });
  }) as typeof fetch;
}

export function reviewTask(imageId: string, labels: Record<string, string | number>): ReviewTask {
  return {
    task_id: `annotation-review:${imageId}`,
    kind: "annotation-review",
    image_set: [imageId],
    context: { query: "baker", conditioned_value: null },
    current_labels: labels,
  };
}

export function surveyTask(
  kind: "inclusion-survey" | "quality-survey",
  value: string,
  query: string,
  k: number,
  imageIds: string[],
): ReviewTask {
  return {
    task_id: `${kind}:${value}:${query}:${k}`,
    kind,
    image_set: imageIds,
    context: { query, conditioned_value: value },
    current_labels: null,
  };
}
