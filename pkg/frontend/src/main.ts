/**
 * Browser entry point: owns one ViewState, re-renders on every change, and
 * wires DOM events to the session. All logic lives in model.ts/render.ts;
 * this file is deliberately thin glue.
 *
 * The API base defaults to the page origin; override with ?api=http://host:port
 * when the service runs elsewhere (the dev server proxies instead).
 */

import { ApiError, ReviewApi } from "./api.js";
import { ReviewSession } from "./model.js";
import { formatCode, initialViewState, renderApp } from "./render.js";

function apiBase(): string {
  const param = new URLSearchParams(window.location.search).get("api");
  return param ?? "";
}

function numberOrUndefined(raw: string): number | undefined {
  const trimmed = raw.trim();
  if (trimmed === "") {
    return undefined;
  }
  const parsed = Number(trimmed);
  return Number.isFinite(parsed) ? parsed : undefined;
}

export function start(root: HTMLElement): void {
  const api = new ReviewApi(apiBase());
  const session = new ReviewSession(api);
  const state = initialViewState();

  function draw(): void {
    state.iterations = session.iterations;
    state.selectedRank = session.selectedRank;
    root.innerHTML = renderApp(state);
    bind();
  }

  function showError(err: unknown): void {
    if (err instanceof ApiError) {
      state.error = { code: err.code, detail: err.detail };
    } else {
      state.error = { code: "Internal", detail: String(err) };
    }
  }

  async function onSubmit(event: Event): Promise<void> {
    event.preventDefault();
    if (!session.canSubmit(state.input) || state.busy) {
      return;
    }
    state.busy = true;
    state.error = null;
    state.notice = null;
    state.overrideError = null;
    draw();
    try {
      await session.classify({
        description: state.input,
        weight: numberOrUndefined(state.weight),
        value: numberOrUndefined(state.value),
      });
    } catch (err) {
      showError(err);
    } finally {
      state.busy = false;
      draw();
    }
  }

  async function onAccept(): Promise<void> {
    state.busy = true;
    state.error = null;
    state.notice = null;
    draw();
    try {
      const decision = await session.accept();
      state.notice = `accepted, recorded at ${decision.recorded_at}`;
    } catch (err) {
      showError(err);
    } finally {
      state.busy = false;
      draw();
    }
  }

  async function onOverride(): Promise<void> {
    state.busy = true;
    state.error = null;
    state.notice = null;
    state.overrideError = null;
    draw();
    try {
      const result = await session.override(state.overrideCode);
      if (!result.ok) {
        state.overrideError = result.reason;
      } else {
        state.notice = result.outsideHeading
          ? `override ${formatCode(result.code)} recorded; note: outside the predicted heading ${session.latest?.trail.hs4.chosen ?? ""}`
          : `override ${formatCode(result.code)} recorded`;
      }
    } catch (err) {
      showError(err);
    } finally {
      state.busy = false;
      draw();
    }
  }

  function bind(): void {
    const form = root.querySelector<HTMLFormElement>("#classify-form");
    form?.addEventListener("submit", (e) => void onSubmit(e));

    const description = root.querySelector<HTMLInputElement>("#description");
    description?.addEventListener("input", () => {
      state.input = description.value;
      const submit = root.querySelector<HTMLButtonElement>("#submit");
      if (submit) {
        submit.disabled = state.busy || state.input.trim().length === 0;
      }
    });
    const weight = root.querySelector<HTMLInputElement>("#weight");
    weight?.addEventListener("input", () => {
      state.weight = weight.value;
    });
    const value = root.querySelector<HTMLInputElement>("#value");
    value?.addEventListener("input", () => {
      state.value = value.value;
    });

    root.querySelector<HTMLButtonElement>("#accept")?.addEventListener("click", () => void onAccept());
    const overrideInput = root.querySelector<HTMLInputElement>("#override-code");
    overrideInput?.addEventListener("input", () => {
      state.overrideCode = overrideInput.value;
    });
    root.querySelector<HTMLButtonElement>("#override")?.addEventListener("click", () => void onOverride());

    for (const card of root.querySelectorAll<HTMLElement>(".candidate")) {
      card.addEventListener("click", () => {
        session.selectCandidate(Number(card.dataset.rank));
        draw();
      });
    }
  }

  draw();
}

const rootElement = typeof document === "undefined" ? null : document.getElementById("app");
if (rootElement) {
  start(rootElement);
}
