import json
from pathlib import Path

import pytest

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "crowdlab" / "scenarios"


@pytest.fixture(scope="session")
def reference_document() -> str:
    return (SCENARIOS / "reference_asset.json").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def scenarios_dir() -> Path:
    return SCENARIOS


def make_option(oid, name, next_question=None, credits=None):
    return {
        "id": oid,
        "Name": name,
        "NextQuestion": next_question,
        "Credits": "" if credits is None else str(credits),
    }


def make_question(qid, lat, lon, *, qtype="radio", options=None, vicinity="25",
                  mandatory="true", sensors=None, time="3", frequency="Medium"):
    if options is None and qtype != "textbox":
        options = [make_option(1, "Safe"), make_option(2, "Dangerous")]
    return {
        "id": qid,
        "Question": f"question {qid}",
        "Type": qtype,
        "Latitude": str(lat),
        "Longitude": str(lon),
        "Sensor": sensors or [],
        "Time": time,
        "Frequency": frequency,
        "Sequence": "Disable",
        "Visibility": "true",
        "Mandatory": mandatory,
        "Option": options or [],
        "Combination": None,
        "Vicinity": vicinity,
    }


def make_document(questions, *, mode="Simple", default_credit="3", name="test-asset"):
    return json.dumps({
        "Id": "test",
        "Name": name,
        "Url": "http://localhost",
        "Metadata": {"record": {
            "StartAndDestinationModel": {
                "StartLatitude": None,
                "StartLongitude": None,
                "DestinationLatitude": None,
                "DestinationLongitude": None,
                "Mode": mode,
                "DefaultCredit": default_credit,
            },
            "SampleDataModel": questions,
        }},
    })


# four points of interest 300 m apart going north from a city-center base
POI_LATS = [47.3716, 47.3743, 47.3770, 47.3797]
POI_LON = 8.5386


def four_poi_document(mode="Sequential"):
    return make_document(
        [make_question(i + 1, lat, POI_LON) for i, lat in enumerate(POI_LATS)],
        mode=mode,
    )
