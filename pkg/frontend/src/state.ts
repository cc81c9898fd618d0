// Client session state as a pure reducer over the event stream. Rendering
// the same event log always produces the same state, which is what the
// tests replay. Votes are stored only when a round_revealed event carries
// them and are wiped the moment a round is reopened: the client never
// caches revealed votes across rounds, and unrevealed votes never exist
// here at all (the server only streams counts).

import type { Participant, Phase, RatingLetter, StreamEvent } from "./types.js";

export interface RoundState {
  indicatorId: number | null;
  roundNumber: number;
  votesCast: number;
  votesExpected: number;
  revealed: boolean;
  votes: Record<string, RatingLetter>;
  justifications: Record<string, string>;
  unanimous: RatingLetter | null;
  previous: {
    roundNumber: number;
    votes: Record<string, RatingLetter>;
    justifications: Record<string, string>;
  } | null;
  myVote: RatingLetter | null;
}

export interface ClientSessionState {
  connection: "idle" | "connecting" | "live" | "error" | "closed";
  lastSeq: number;
  phase: Phase;
  organization: string;
  briefing: string;
  participants: Participant[];
  consensus: Record<number, { rating: RatingLetter; evidence: string[]; override: boolean }>;
  totalItems: number;
  round: RoundState;
}

export type ClientAction =
  | { kind: "event"; event: StreamEvent }
  | { kind: "local_vote"; rating: RatingLetter }
  | { kind: "connection"; value: ClientSessionState["connection"] }
  | { kind: "configure"; totalItems: number };

const emptyRound: RoundState = {
  indicatorId: null,
  roundNumber: 0,
  votesCast: 0,
  votesExpected: 0,
  revealed: false,
  votes: {},
  justifications: {},
  unanimous: null,
  previous: null,
  myVote: null,
};

export function initialState(): ClientSessionState {
  return {
    connection: "idle",
    lastSeq: 0,
    phase: "planning",
    organization: "",
    briefing: "",
    participants: [],
    consensus: {},
    totalItems: 16,
    round: { ...emptyRound },
  };
}

export function resolvedCount(state: ClientSessionState): number {
  return Object.keys(state.consensus).length;
}

function unanimousOf(votes: Record<string, RatingLetter>): RatingLetter | null {
  const values = [...new Set(Object.values(votes))];
  return values.length === 1 ? (values[0] as RatingLetter) : null;
}

export function reduce(state: ClientSessionState, action: ClientAction): ClientSessionState {
  switch (action.kind) {
    case "connection":
      return { ...state, connection: action.value };
    case "configure":
      return { ...state, totalItems: action.totalItems };
    case "local_vote":
      if (state.round.indicatorId === null || state.round.revealed) return state;
      return { ...state, round: { ...state.round, myVote: action.rating } };
    case "event":
      return applyEvent(state, action.event);
  }
}

function applyEvent(state: ClientSessionState, event: StreamEvent): ClientSessionState {
  if (event.seq <= state.lastSeq) return state; // at-least-once dedup
  const next = { ...state, lastSeq: event.seq };
  const payload = event.payload as Record<string, any>;
  switch (event.type) {
    case "session_created":
      return {
        ...next,
        organization: payload.organization_name as string,
        participants: [...(payload.participants as Participant[])].sort((a, b) =>
          a.id.localeCompare(b.id),
        ),
        totalItems: (payload.total_items as number) || state.totalItems,
      };
    case "participant_joined": {
      const joined = payload.participant as Participant;
      const participants = state.participants.filter((p) => p.id !== joined.id);
      participants.push(joined);
      participants.sort((a, b) => a.id.localeCompare(b.id));
      return { ...next, participants };
    }
    case "phase_changed": {
      const phase = payload.to as Phase;
      return {
        ...next,
        phase,
        briefing: typeof payload.briefing === "string" ? payload.briefing : state.briefing,
        connection: phase === "closed" ? "closed" : state.connection,
      };
    }
    case "item_opened":
      return {
        ...next,
        round: {
          ...emptyRound,
          indicatorId: payload.indicator_id as number,
          roundNumber: payload.round_number as number,
          votesExpected: (payload.expected_voters as string[]).length,
        },
      };
    case "vote_progress": {
      if (payload.indicator_id !== state.round.indicatorId) return next;
      if (payload.round_number !== state.round.roundNumber) return next;
      return {
        ...next,
        round: {
          ...state.round,
          votesCast: payload.votes_cast as number,
          votesExpected: payload.votes_expected as number,
        },
      };
    }
    case "round_revealed": {
      if (payload.indicator_id !== state.round.indicatorId) return next;
      const votes = payload.votes as Record<string, RatingLetter>;
      return {
        ...next,
        round: {
          ...state.round,
          revealed: true,
          votes,
          unanimous: unanimousOf(votes),
        },
      };
    }
    case "justification_added": {
      if (payload.indicator_id !== state.round.indicatorId) return next;
      return {
        ...next,
        round: {
          ...state.round,
          justifications: {
            ...state.round.justifications,
            [payload.assessor as string]: payload.text as string,
          },
        },
      };
    }
    case "round_reopened": {
      if (payload.indicator_id !== state.round.indicatorId) return next;
      const previous = payload.previous_round as RoundState["previous"] & {
        round_number: number;
      };
      return {
        ...next,
        round: {
          ...emptyRound,
          indicatorId: state.round.indicatorId,
          roundNumber: payload.round_number as number,
          votesExpected: (payload.expected_voters as string[]).length,
          previous: previous
            ? {
                roundNumber: previous.round_number,
                votes: previous.votes ?? {},
                justifications: previous.justifications ?? {},
              }
            : null,
        },
      };
    }
    case "consensus_recorded": {
      const indicatorId = payload.indicator_id as number;
      return {
        ...next,
        consensus: {
          ...state.consensus,
          [indicatorId]: {
            rating: payload.rating as RatingLetter,
            evidence: (payload.evidence as string[]) ?? [],
            override: Boolean(payload.override),
          },
        },
        round:
          state.round.indicatorId === indicatorId ? { ...emptyRound } : state.round,
      };
    }
    default:
      return next;
  }
}
