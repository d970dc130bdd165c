import { describe, expect, it, vi } from "vitest";

import { ApiError, ReviewApi } from "../src/api.js";
import { auditRecord, classifyResponse, jsonResponse } from "./fixtures.js";

describe("ReviewApi", () => {
  it("posts classify input as JSON and parses the response", async () => {
    const fetchFn = vi.fn().mockResolvedValue(jsonResponse(200, classifyResponse()));
    const api = new ReviewApi("http://svc:8000", fetchFn);

    const result = await api.classify({ description: "roller bearings", weight: 2.5 });

    expect(result.audit_id).toBe("1786690000000-000042");
    expect(result.candidates).toHaveLength(3);
    const [url, init] = fetchFn.mock.calls[0];
    expect(url).toBe("http://svc:8000/classify");
    expect(init.method).toBe("POST");
    expect(init.headers["Content-Type"]).toBe("application/json");
    expect(JSON.parse(init.body)).toEqual({ description: "roller bearings", weight: 2.5 });
  });

  it("surfaces the server error JSON verbatim", async () => {
    const fetchFn = vi
      .fn()
      .mockResolvedValue(jsonResponse(400, { error: "EmptyAfterCleaning", detail: "nothing left" }));
    const api = new ReviewApi("", fetchFn);

    const err = await api.classify({ description: "???" }).catch((e: unknown) => e);

    expect(err).toBeInstanceOf(ApiError);
    const apiErr = err as ApiError;
    expect(apiErr.status).toBe(400);
    expect(apiErr.code).toBe("EmptyAfterCleaning");
    expect(apiErr.detail).toBe("nothing left");
  });

  it("wraps network failures as Unreachable with status 0", async () => {
    const fetchFn = vi.fn().mockRejectedValue(new TypeError("fetch failed"));
    const api = new ReviewApi("http://down:1", fetchFn);

    const err = await api.health().catch((e: unknown) => e);

    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(0);
    expect((err as ApiError).code).toBe("Unreachable");
  });

  it("keeps a non-JSON error body as the bare status", async () => {
    const fetchFn = vi.fn().mockResolvedValue(new Response("boom", { status: 502 }));
    const api = new ReviewApi("", fetchFn);

    const err = (await api.health().catch((e: unknown) => e)) as ApiError;

    expect(err.status).toBe(502);
    expect(err.code).toBe("Internal");
  });

  it("fetches audits and posts decisions with and without a code", async () => {
    const fetchFn = vi
      .fn()
      .mockResolvedValueOnce(jsonResponse(200, auditRecord()))
      .mockResolvedValueOnce(
        jsonResponse(200, {
          audit_id: "a-1",
          decision: { action: "accept", code: null, recorded_at: "2026-08-14T09:01:00+00:00" },
        }),
      )
      .mockResolvedValueOnce(
        jsonResponse(200, {
          audit_id: "a-1",
          decision: { action: "override", code: "848250", recorded_at: "2026-08-14T09:02:00+00:00" },
        }),
      );
    const api = new ReviewApi("", fetchFn);

    const audit = await api.audit("a-1");
    expect(audit.trail.hs4.chosen).toBe("8482");
    expect(fetchFn.mock.calls[0][0]).toBe("/audit/a-1");

    await api.decide("a-1", "accept");
    expect(JSON.parse(fetchFn.mock.calls[1][1].body)).toEqual({ action: "accept" });

    await api.decide("a-1", "override", "848250");
    expect(fetchFn.mock.calls[2][0]).toBe("/audit/a-1/decision");
    expect(JSON.parse(fetchFn.mock.calls[2][1].body)).toEqual({ action: "override", code: "848250" });
  });

  it("encodes schedule codes into the path", async () => {
    const fetchFn = vi.fn().mockResolvedValue(jsonResponse(200, { code: "8482", description: "", statistical_suffix: null, children: [] }));
    const api = new ReviewApi("http://svc:8000/", fetchFn);

    await api.scheduleNode("848250");

    expect(fetchFn.mock.calls[0][0]).toBe("http://svc:8000/schedule/848250");
  });
});
