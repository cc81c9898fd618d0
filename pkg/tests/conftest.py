"""Shared fixtures: the canonical model and the four observed case studies.

``CASE_RESPONSES`` holds the questionnaire responses of four small
organizations, each assessed twice (by the organization's team and by an
independent observer). These eight rating columns drive the scoring and
reliability oracles throughout the suite.
"""
from __future__ import annotations

import pytest

from upcase.model import load_default_model
from upcase.scoring import Rating, ResponseSheet

# item id -> ratings in column order ORG_COLUMNS
CASE_RESPONSES: dict[int, tuple[int, ...]] = {
    1:  (2, 2, 2, 2, 1, 2, 2, 2),
    2:  (0, 0, 1, 0, 1, 0, 1, 0),
    3:  (0, 0, 1, 0, 1, 0, 0, 0),
    4:  (1, 1, 1, 1, 1, 1, 0, 0),
    5:  (0, 1, 1, 1, 0, 1, 1, 1),
    6:  (1, 0, 2, 1, 2, 1, 1, 1),
    7:  (1, 2, 2, 2, 2, 2, 1, 2),
    8:  (0, 2, 1, 2, 1, 2, 2, 2),
    9:  (1, 1, 2, 1, 2, 1, 1, 0),
    10: (1, 1, 1, 2, 2, 1, 1, 1),
    11: (1, 1, 2, 2, 2, 2, 2, 1),
    12: (1, 2, 2, 2, 2, 2, 2, 1),
    13: (2, 2, 2, 2, 2, 2, 0, 0),
    14: (0, 0, 0, 0, 0, 0, 0, 0),
    15: (0, 0, 0, 0, 1, 0, 2, 0),
    16: (0, 0, 2, 1, 0, 0, 0, 0),
}

ORG_COLUMNS = (
    "org1_team", "org1_observer",
    "org2_team", "org2_observer",
    "org3_team", "org3_observer",
    "org4_team", "org4_observer",
)

SECTIONS = {
    "UP1": [1, 2, 3],
    "UP2": [4, 5, 6, 7, 8],
    "UP3": [9, 10, 11, 12, 13],
    "UP4": [14, 15, 16],
}

_POINTS_TO_RATING = {0: Rating.N, 1: Rating.P, 2: Rating.F}


def column(name: str) -> dict[int, int]:
    """Raw 0/1/2 points of one assessment column, keyed by item id."""
    index = ORG_COLUMNS.index(name)
    return {item: values[index] for item, values in CASE_RESPONSES.items()}


def column_vector(name: str) -> list[int]:
    """The same column as a list ordered by item id."""
    col = column(name)
    return [col[i] for i in sorted(col)]


def sheet(name: str, model_version: str = "1.0") -> ResponseSheet:
    return ResponseSheet(
        model_version=model_version,
        respondent_label=name,
        ratings={item: _POINTS_TO_RATING[v] for item, v in column(name).items()},
    )


def uniform_sheet(rating: Rating, model_version: str = "1.0") -> ResponseSheet:
    return ResponseSheet(
        model_version=model_version,
        respondent_label=f"all-{rating.value}",
        ratings={item: rating for item in CASE_RESPONSES},
    )


@pytest.fixture(scope="session")
def model():
    return load_default_model()


def make_plan(organization: str = "Acme", assessors: int = 2, with_sponsor: bool = False,
              model_version: str = "1.0"):
    """A valid plan with one moderator and n assessors, deterministic ids."""
    from upcase.session import AssessmentPlan, Participant, Role

    participants = [Participant("mod", "Morgan", Role.MODERATOR)]
    for i in range(assessors):
        participants.append(Participant(f"a{i + 1}", f"Assessor {i + 1}", Role.ASSESSOR))
    if with_sponsor:
        participants.append(Participant("spon", "Sam", Role.SPONSOR))
    return AssessmentPlan(
        organization_name=organization,
        model_version=model_version,
        participants=tuple(participants),
    )


def run_scripted_session(column_name: str, model, assessors: int = 2):
    """Drive a full session whose unanimous votes reproduce one response column."""
    from upcase.session import AssessmentSession

    letters = {0: "N", 1: "P", 2: "F"}
    ratings = {item: letters[v] for item, v in column(column_name).items()}
    session = AssessmentSession.create(
        make_plan(organization=column_name, assessors=assessors), model
    )
    session.begin_collection()
    while session.current_item_id is not None:
        rating = ratings[session.current_item_id]
        for i in range(assessors):
            session.cast_vote(f"a{i + 1}", rating)
        session.record_consensus("mod", rating, ["work product sample"])
    sheet, profile = session.finalize(model)
    return session, sheet, profile
