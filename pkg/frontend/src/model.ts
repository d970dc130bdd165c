/**
 * Session state for one reviewer: the iteration history, the current
 * selection, and the override rules. No similarity math happens here; the
 * session only orchestrates API calls and remembers their results.
 */

import type {
  AuditRecord,
  AuditTrail,
  Candidate,
  ClassifyInput,
  ClassifyResponse,
  Decision,
  DecisionResponse,
  ScheduleNode,
} from "./api.js";
import { ApiError } from "./api.js";

export interface SessionApi {
  classify(input: ClassifyInput): Promise<ClassifyResponse>;
  audit(auditId: string): Promise<AuditRecord>;
  decide(auditId: string, action: "accept" | "override", code?: string): Promise<DecisionResponse>;
  scheduleNode(code: string): Promise<ScheduleNode>;
}

/** One classify round trip: what was asked and everything the server said. */
export interface Iteration {
  input: ClassifyInput;
  auditId: string;
  candidates: Candidate[];
  trail: AuditTrail;
  decisions: Decision[];
}

export type OverrideResult =
  | { ok: true; decision: Decision; code: string; outsideHeading: boolean }
  | { ok: false; reason: string };

/** "8482.50" -> "848250"; null when the input is not a 6-digit code. */
export function normalizeCode(raw: string): string | null {
  const digits = raw.replace(/[.\s]/g, "");
  return /^\d{6}$/.test(digits) ? digits : null;
}

export class ReviewSession {
  readonly iterations: Iteration[] = [];
  selectedRank: number | null = null;

  constructor(private readonly api: SessionApi) {}

  get latest(): Iteration | undefined {
    return this.iterations[this.iterations.length - 1];
  }

  canSubmit(description: string): boolean {
    return description.trim().length > 0;
  }

  /** Run one classify + audit fetch and append it to the history. */
  async classify(input: ClassifyInput): Promise<Iteration> {
    if (!this.canSubmit(input.description)) {
      throw new ApiError(0, "BadRequest", "description must not be empty");
    }
    const response = await this.api.classify(input);
    const audit = await this.api.audit(response.audit_id);
    const iteration: Iteration = {
      input,
      auditId: response.audit_id,
      candidates: response.candidates,
      trail: audit.trail,
      decisions: audit.decisions,
    };
    this.iterations.push(iteration);
    this.selectedRank = null;
    return iteration;
  }

  selectCandidate(rank: number): void {
    this.selectedRank = rank;
  }

  /** Record acceptance of the current candidates on the latest iteration. */
  async accept(): Promise<Decision> {
    const current = this.latest;
    if (!current) {
      throw new ApiError(0, "BadRequest", "nothing classified yet");
    }
    const response = await this.api.decide(current.auditId, "accept");
    current.decisions.push(response.decision);
    return response.decision;
  }

  /**
   * Record an override. The code must normalize to six digits and exist in
   * the schedule (checked server-side via the schedule endpoint); a code
   * outside the chosen heading is allowed but reported so the view can warn.
   */
  async override(rawCode: string): Promise<OverrideResult> {
    const current = this.latest;
    if (!current) {
      return { ok: false, reason: "nothing classified yet" };
    }
    const code = normalizeCode(rawCode);
    if (code === null) {
      return { ok: false, reason: `not a 6-digit code: "${rawCode}"` };
    }
    try {
      await this.api.scheduleNode(code);
    } catch (err) {
      if (err instanceof ApiError && (err.status === 404 || err.status === 400)) {
        return { ok: false, reason: `${code} is not in the schedule (${err.code})` };
      }
      throw err;
    }
    const response = await this.api.decide(current.auditId, "override", code);
    current.decisions.push(response.decision);
    return {
      ok: true,
      decision: response.decision,
      code,
      outsideHeading: !code.startsWith(current.trail.hs4.chosen),
    };
  }
}
