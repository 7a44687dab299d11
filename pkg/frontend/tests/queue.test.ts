import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { SubmissionQueue, newEventId, type PendingSubmission } from "../src/queue.js";
import { fakeFetch, type FakeCall } from "./helpers.js";

function correction(eventId: string, field = "race"): PendingSubmission {
  return {
    kind: "correction",
    body: {
      reviewer_id: "rev",
      image_id: "img-1",
      field: field as never,
      new_value: "Black",
      event_id: eventId,
    },
  };
}

describe("SubmissionQueue", () => {
  it("drains strictly in enqueue order", async () => {
    const calls: FakeCall[] = [];
    const fetchFn = fakeFetch(
      [
        {
          match: (url, method) => method === "POST" && url.endsWith("/api/corrections"),
          respond: (body) => ({
            status: 201,
            payload: { status: "accepted", event_id: (body as { event_id: string }).event_id },
          }),
        },
      ],
      calls,
    );
    const queue = new SubmissionQueue(new ApiClient("http://x", undefined, fetchFn));
    queue.enqueue(correction("e1"));
    queue.enqueue(correction("e2"));
    queue.enqueue(correction("e3"));
    expect(await queue.drain()).toBe(3);
    expect(calls.map((c) => (c.body as { event_id: string }).event_id)).toEqual(["e1", "e2", "e3"]);
    expect(queue.pending).toBe(0);
  });

  it("halts on transport failure and replays idempotently with the same event id", async () => {
    const seen: string[] = [];
    let failuresLeft = 2;
    const fetchFn = (async (_url: RequestInfo | URL, init?: RequestInit) => {
      if (failuresLeft > 0) {
        failuresLeft -= 1;
        throw new TypeError("network down");
      }
      const body = JSON.parse(String(init?.body)) as { event_id: string };
      const duplicate = seen.includes(body.event_id);
      if (!duplicate) seen.push(body.event_id);
      return new Response(
        JSON.stringify({ status: duplicate ? "duplicate" : "accepted", event_id: body.event_id }),
        { status: duplicate ? 200 : 201 },
      );
    }) as typeof fetch;

    const offline: PendingSubmission[] = [];
    const queue = new SubmissionQueue(new ApiClient("http://x", undefined, fetchFn), {
      onOffline: (item) => offline.push(item),
    });
    queue.enqueue(correction("e1"));
    queue.enqueue(correction("e2"));

    expect(await queue.drain()).toBe(0); // first attempt fails, order preserved
    expect(queue.pending).toBe(2);
    expect(await queue.drain()).toBe(0); // still down
    expect(await queue.drain()).toBe(2); // back online: both land, in order
    expect(seen).toEqual(["e1", "e2"]);
    expect(offline.length).toBe(2);

    // a retried duplicate would be acknowledged without a second append
    queue.enqueue(correction("e2"));
    expect(await queue.drain()).toBe(1);
    expect(seen).toEqual(["e1", "e2"]);
  });

  it("drops rejected submissions and reports them", async () => {
    const calls: FakeCall[] = [];
    const fetchFn = fakeFetch(
      [
        {
          match: (_url, method) => method === "POST",
          respond: (body) => {
            const b = body as { new_value: unknown; event_id: string };
            if (b.new_value === "Martian") return { status: 422, payload: { detail: "bad label" } };
            return { status: 201, payload: { status: "accepted", event_id: b.event_id } };
          },
        },
      ],
      calls,
    );
    const rejections: ApiError[] = [];
    const queue = new SubmissionQueue(new ApiClient("http://x", undefined, fetchFn), {
      onRejected: (_item, error) => rejections.push(error),
    });
    queue.enqueue(correction("good-1"));
    queue.enqueue({
      kind: "correction",
      body: {
        reviewer_id: "rev",
        image_id: "img-1",
        field: "race",
        new_value: "Martian",
        event_id: "bad-1",
      },
    });
    queue.enqueue(correction("good-2"));
    expect(await queue.drain()).toBe(2); // rejection does not block later items
    expect(queue.pending).toBe(0);
    expect(rejections).toHaveLength(1);
    expect(rejections[0]!.status).toBe(422);
    expect(rejections[0]!.detail).toBe("bad label");
  });

  it("generates distinct client event ids", () => {
    const ids = new Set(Array.from({ length: 200 }, () => newEventId()));
    expect(ids.size).toBe(200);
  });
});
