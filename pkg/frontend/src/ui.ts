// DOM rendering. The whole view is rebuilt from the reduced state on every
// change; cards on the table flip only when the state says the round is
// revealed, i.e. only after a round_revealed event arrived.

import type { ClientSessionState } from "./state.js";
import { resolvedCount } from "./state.js";
import type {
  Indicator,
  RatingLetter,
  ReferenceModel,
  ResultsDocument,
  RoleName,
} from "./types.js";
import { CARD_DECK, CARD_LABELS } from "./types.js";

export interface UiCallbacks {
  onVote: (rating: RatingLetter) => void;
  onJustify: (text: string) => void;
  onResolve: () => void;
  onConsensus: (rating: RatingLetter, evidence: string[]) => void;
  onPhase: (action: "begin_collection" | "finalize" | "close") => void;
}

export interface UiContext {
  state: ClientSessionState;
  model: ReferenceModel | null;
  role: RoleName;
  selfId: string;
  organization: string;
  whoVoted: string[];
  results: ResultsDocument | null;
  reportMarkdown: string;
  lastError: string;
}

function el(
  tag: string,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  for (const child of children) {
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
}

function indicatorById(model: ReferenceModel | null, id: number | null): Indicator | null {
  if (!model || id === null) return null;
  return model.indicators.find((indicator) => indicator.id === id) ?? null;
}

function participantName(ctx: UiContext, id: string): string {
  return ctx.state.participants.find((p) => p.id === id)?.display_name ?? id;
}

function header(ctx: UiContext): HTMLElement {
  const { state } = ctx;
  return el("header", { class: "topbar" }, [
    el("span", { id: "organization" }, [state.organization || ctx.organization]),
    el("span", { id: "phase", "data-phase": state.phase }, [state.phase]),
    el("span", { id: "progress" }, [
      `${resolvedCount(state)}/${state.totalItems} items resolved`,
    ]),
    el("span", { id: "connection", "data-state": state.connection }, [state.connection]),
  ]);
}

function tableCards(ctx: UiContext): HTMLElement {
  const { round } = ctx.state;
  const seats = el("div", { id: "table-cards" });
  const voters =
    Object.keys(round.votes).length > 0 ? Object.keys(round.votes).sort() : null;
  const expected = voters ?? Array.from({ length: round.votesExpected }, (_, i) => `seat-${i}`);
  // before the reveal only counts are known: render anonymous card backs
  expected.forEach((voter, index) => {
    const hasVote = round.revealed || index < round.votesCast;
    const card = el("div", {
      class: "table-card" + (round.revealed ? " flipped" : ""),
      "data-seat": round.revealed ? voter : `seat-${index}`,
    });
    if (round.revealed && voters) {
      const letter = round.votes[voter] as RatingLetter;
      card.append(
        el("span", { class: "card-face", "data-rating": letter }, [letter]),
        el("span", { class: "card-owner" }, [participantName(ctx, voter)]),
      );
    } else {
      card.append(
        el("span", { class: hasVote ? "card-back placed" : "card-back empty" }, [
          hasVote ? "card placed" : "waiting",
        ]),
      );
    }
    seats.append(card);
  });
  return seats;
}

function assessorDeck(ctx: UiContext, callbacks: UiCallbacks): HTMLElement {
  const { round } = ctx.state;
  const deck = el("div", { id: "deck" });
  for (const letter of CARD_DECK) {
    const button = el(
      "button",
      {
        class: "card" + (round.myVote === letter ? " selected" : ""),
        "data-rating": letter,
        ...(round.revealed ? { disabled: "disabled" } : {}),
      },
      [letter, el("small", {}, [CARD_LABELS[letter]])],
    );
    button.addEventListener("click", () => callbacks.onVote(letter));
    deck.append(button);
  }
  return deck;
}

function justificationPanel(ctx: UiContext, callbacks: UiCallbacks): HTMLElement {
  const { round } = ctx.state;
  const panel = el("div", { id: "justification-panel" }, [
    el("p", {}, ["Opinions differ. Briefly justify your choice before the next round."]),
  ]);
  const list = el("ul", { id: "justifications" });
  for (const [assessor, text] of Object.entries(round.justifications).sort()) {
    list.append(el("li", { "data-assessor": assessor }, [
      `${participantName(ctx, assessor)}: ${text}`,
    ]));
  }
  panel.append(list);
  if (ctx.role === "assessor") {
    const input = el("textarea", { id: "justification-text" }) as HTMLTextAreaElement;
    const send = el("button", { id: "justification-send" }, ["Share justification"]);
    send.addEventListener("click", () => {
      if (input.value.trim()) callbacks.onJustify(input.value.trim());
      input.value = "";
    });
    panel.append(input, send);
  }
  return panel;
}

function moderatorGuide(ctx: UiContext, indicator: Indicator | null): HTMLElement {
  const guide = el("div", { id: "item-guide" });
  if (!indicator) return guide;
  guide.append(
    el("p", { id: "item-practice" }, [indicator.practice]),
    el("p", { id: "item-description" }, [indicator.description]),
    el("p", { id: "item-techniques" }, ["Techniques: " + indicator.techniques.join(", ")]),
    el("p", { id: "item-work-products" }, [
      "Work products: " + indicator.work_products.join(", "),
    ]),
  );
  if (ctx.model) {
    const glossary = el("details", { id: "glossary" }, [el("summary", {}, ["Glossary"])]);
    for (const entry of ctx.model.glossary) {
      glossary.append(el("p", {}, [`${entry.term}: ${entry.definition}`]));
    }
    guide.append(glossary);
  }
  return guide;
}

function moderatorControls(ctx: UiContext, callbacks: UiCallbacks): HTMLElement {
  const { state } = ctx;
  const { round } = state;
  const controls = el("div", { id: "moderator-controls" });
  if (!round.revealed) {
    controls.append(
      el("p", { id: "who-voted" }, [
        ctx.whoVoted.length
          ? "Voted: " + ctx.whoVoted.map((id) => participantName(ctx, id)).join(", ")
          : "No votes yet",
      ]),
    );
    return controls;
  }
  if (round.unanimous === null) {
    const reopen = el("button", { id: "reopen" }, ["Open next voting round"]);
    reopen.addEventListener("click", () => callbacks.onResolve());
    controls.append(reopen);
  }
  const form = el("div", { id: "consensus-form" });
  const select = el("select", { id: "consensus-rating" }) as HTMLSelectElement;
  for (const letter of CARD_DECK) {
    const option = el("option", { value: letter }, [
      `${letter} (${CARD_LABELS[letter]})`,
    ]) as HTMLOptionElement;
    if (round.unanimous === letter) option.selected = true;
    select.append(option);
  }
  const evidence = el("input", {
    id: "evidence",
    placeholder: "work products cited as evidence (separate with ;)",
  }) as HTMLInputElement;
  const record = el("button", { id: "record-consensus" }, ["Record consensus"]);
  record.addEventListener("click", () => {
    const entries = evidence.value
      .split(";")
      .map((entry) => entry.trim())
      .filter(Boolean);
    callbacks.onConsensus(select.value as RatingLetter, entries);
  });
  form.append(select, evidence, record);
  controls.append(form);
  return controls;
}

function collectingView(ctx: UiContext, callbacks: UiCallbacks): HTMLElement {
  const { state } = ctx;
  const container = el("section", { id: "collecting" });
  const indicator = indicatorById(ctx.model, state.round.indicatorId);
  if (state.round.indicatorId === null) {
    container.append(
      el("p", { id: "item-statement" }, ["All items resolved."]),
    );
  } else {
    container.append(
      el("h2", { id: "item-title" }, [
        `Item ${state.round.indicatorId} of ${state.totalItems}` +
          (state.round.roundNumber > 1 ? ` (round ${state.round.roundNumber})` : ""),
      ]),
      el("p", { id: "item-statement" }, [indicator?.statement ?? ""]),
    );
    if (ctx.role === "moderator") container.append(moderatorGuide(ctx, indicator));
    container.append(
      el("p", { id: "vote-status" }, [
        `${state.round.votesCast}/${state.round.votesExpected} cards placed`,
      ]),
      tableCards(ctx),
    );
    if (state.round.previous) {
      container.append(
        el("p", { id: "previous-round" }, [
          `Round ${state.round.previous.roundNumber} was split; votes: ` +
            Object.entries(state.round.previous.votes)
              .sort()
              .map(([voter, letter]) => `${participantName(ctx, voter)}=${letter}`)
              .join(", "),
        ]),
      );
    }
    if (ctx.role === "assessor") container.append(assessorDeck(ctx, callbacks));
    if (state.round.revealed && state.round.unanimous === null) {
      container.append(justificationPanel(ctx, callbacks));
    }
    if (ctx.role === "moderator") container.append(moderatorControls(ctx, callbacks));
  }
  if (ctx.role === "moderator") {
    const unresolved: number[] = [];
    for (let id = 1; id <= ctx.state.totalItems; id += 1) {
      if (!(id in ctx.state.consensus)) unresolved.push(id);
    }
    const finalize = el(
      "button",
      {
        id: "finalize",
        ...(unresolved.length ? { disabled: "disabled" } : {}),
        title: unresolved.length
          ? "Unresolved items: " + unresolved.join(", ")
          : "Generate results and the report",
      },
      ["Finalize assessment"],
    );
    finalize.addEventListener("click", () => callbacks.onPhase("finalize"));
    container.append(finalize);
  }
  return container;
}

function reportView(ctx: UiContext): HTMLElement {
  const container = el("section", { id: "report-view" });
  if (!ctx.results) {
    container.append(el("p", {}, ["Generating results..."]));
    return container;
  }
  const { profile } = ctx.results;
  const table = el("table", { id: "profile-table" });
  table.append(
    el("tr", {}, [el("th", {}, ["Scope"]), el("th", {}, ["Score"]), el("th", {}, ["Rating"])]),
  );
  const rows: [string, { display: string; rating: string }][] = [
    ["Usability process", profile.overall],
    ...Object.entries(profile.sub_processes),
  ];
  for (const [scope, cell] of rows) {
    table.append(
      el("tr", { class: "profile-row", "data-scope": scope }, [
        el("td", {}, [scope]),
        el("td", { class: "score" }, [cell.display]),
        el("td", { class: "rating" }, [cell.rating]),
      ]),
    );
  }
  container.append(
    el("h2", {}, ["Assessment results"]),
    table,
    el("p", { id: "capability-level" }, [
      `Capability level: ${profile.capability_level}`,
    ]),
  );
  const improvements = el("ul", { id: "improvements" });
  for (const opportunity of ctx.results.results.improvement_opportunities) {
    improvements.append(
      el("li", { "data-indicator": String(opportunity.indicator_id) }, [
        `Item ${opportunity.indicator_id}: ${opportunity.focus}`,
      ]),
    );
  }
  container.append(el("h3", {}, ["Improvement opportunities"]), improvements);
  if (ctx.reportMarkdown) {
    container.append(el("pre", { id: "report-markdown" }, [ctx.reportMarkdown]));
  }
  return container;
}

export function render(root: HTMLElement, ctx: UiContext, callbacks: UiCallbacks): void {
  root.textContent = "";
  root.append(header(ctx));
  if (ctx.lastError) {
    root.append(el("p", { id: "error", role: "alert" }, [ctx.lastError]));
  }
  const { state } = ctx;
  if (state.phase === "planning") {
    const waiting = el("section", { id: "planning" }, [
      el("p", {}, ["Waiting for the moderator to start data collection."]),
    ]);
    if (ctx.role === "moderator") {
      const start = el("button", { id: "begin-collection" }, ["Begin data collection"]);
      start.addEventListener("click", () => callbacks.onPhase("begin_collection"));
      waiting.append(start);
    }
    root.append(waiting);
  } else if (state.phase === "collecting") {
    if (state.briefing) {
      root.append(
        el("details", { id: "briefing" }, [el("summary", {}, ["Briefing"]), state.briefing]),
      );
    }
    root.append(collectingView(ctx, callbacks));
  } else {
    root.append(reportView(ctx));
    if (ctx.role === "moderator" && state.phase === "reporting") {
      const close = el("button", { id: "close-session" }, ["Close session"]);
      close.addEventListener("click", () => callbacks.onPhase("close"));
      root.append(close);
    }
  }
}
