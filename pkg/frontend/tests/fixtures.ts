/** Canned payloads shaped exactly like the service responses. */

import type {
  AuditRecord,
  AuditTrail,
  Candidate,
  ClassifyResponse,
  GraphMatch,
  ScheduleNode,
} from "../src/api.js";

export function candidates(): Candidate[] {
  return [
    { code: "848250", source: "KnowledgeGraph", score: 0.4469, rank: 1 },
    { code: "848251", source: "KnowledgeGraph", score: 0.3148, rank: 2 },
    { code: "848291", source: "TrainKNN", score: 0.2315, rank: 3 },
  ];
}

export function graphMatches(): GraphMatch[] {
  return [
    {
      code: "848250",
      average_similarity: 0.4469,
      elements: [
        { id: "n0", similarity: 0.626, color: "Green" },
        { id: "n1", similarity: 0.268, color: "LightGreen" },
        { id: "e0", similarity: 0.12, color: "Yellow" },
      ],
    },
    {
      code: "848251",
      average_similarity: 0.3148,
      elements: [
        { id: "n0", similarity: 0.31, color: "LightGreen" },
        { id: "e0", similarity: 0.05, color: "Blue" },
      ],
    },
    {
      code: "848291",
      average_similarity: 0.101,
      elements: [{ id: "n0", similarity: 0.101, color: "Yellow" }],
    },
  ];
}

export function trail(overrides: Partial<AuditTrail> = {}): AuditTrail {
  return {
    pipeline: "hierarchical",
    cleaned_text: "package stc conical roller bearing",
    created_at: "2026-08-14T09:00:00+00:00",
    candidates: candidates(),
    hs2: { probs: { "84": 0.7654, "62": 0.2346 }, chosen: "84" },
    hs4: {
      probs: { "8482": 0.911, "8412": 0.089 },
      chosen: "8482",
      mode: "per_branch",
      constant_branch: false,
    },
    knn: [{ code: "848291", text: "package stc roller bearing", similarity: 0.8315 }],
    kg: graphMatches(),
    flat: null,
    request: { description: "package stc conical roller bearings" },
    fingerprints: { engine: "e".repeat(64), embedder: "f".repeat(64) },
    ...overrides,
  };
}

export function classifyResponse(): ClassifyResponse {
  return { candidates: candidates(), audit_id: "1786690000000-000042" };
}

export function auditRecord(): AuditRecord {
  return { audit_id: "1786690000000-000042", trail: trail(), decisions: [] };
}

export function scheduleNode(code: string): ScheduleNode {
  return {
    code: `${code.slice(0, 4)}.${code.slice(4)}.00`,
    description: "Cone and tapered roller bearings",
    statistical_suffix: "00",
    children: [],
  };
}

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
