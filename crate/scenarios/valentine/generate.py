#!/usr/bin/env python3
"""Generates the Valentine's Day town: scenario.json and script.json.

    python3 scenarios/valentine/generate.py

The script is deterministic. Isabella invites twelve townsfolk to her party
on the 13th, five of them plan to attend on the 14th, and Sam tells seven
people about his run for mayor. Everything else is ordinary daily routine.
"""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))

LOT = 14
GAP = 2
COLS, ROWS = 4, 3
WIDTH = GAP + COLS * (LOT + GAP)
HEIGHT = GAP + ROWS * (LOT + GAP)

# (row, col) of each lot
LOTS = {
    "Lin family house": (0, 0),
    "Moreno family house": (0, 1),
    "Moore family house": (0, 2),
    "Isabella's apartment": (0, 3),
    "Oak Hill College": (1, 0),
    "Hobbs Cafe": (1, 1),
    "The Willows Market and Pharmacy": (1, 2),
    "The Rose and Crown Pub": (1, 3),
    "Oak Hill College dorm": (2, 0),
    "Johnson Park": (2, 1),
    "Artist's co-living space": (2, 2),
    "The Willows apartments": (2, 3),
}

HOMES = {
    "Lin family house": ["John Lin", "Mei Lin", "Eddy Lin"],
    "Moreno family house": ["Tom Moreno", "Jane Moreno"],
    "Moore family house": ["Sam Moore", "Jennifer Moore"],
    "Isabella's apartment": ["Isabella Rodriguez"],
    "Oak Hill College dorm": ["Klaus Mueller", "Maria Lopez", "Ayesha Khan", "Wolfgang Schulz"],
    "Artist's co-living space": ["Latoya Williams", "Rajiv Patel", "Abigail Chen", "Francisco Lopez", "Hailey Johnson"],
    "The Willows apartments": [
        "Arthur Burton", "Giorgio Rossi", "Carlos Gomez", "Ryan Park",
        "Adam Smith", "Yuriko Yamamoto", "Tamara Taylor", "Carmen Ortiz",
    ],
}

# name -> (age, traits, occupation phrase)
PEOPLE = {
    "Isabella Rodriguez": (34, "friendly, outgoing, hospitable", "runs Hobbs Cafe"),
    "John Lin": (45, "patient, kind, organized", "runs the pharmacy counter at The Willows Market and Pharmacy"),
    "Mei Lin": (44, "warm, curious, precise", "teaches philosophy at Oak Hill College"),
    "Eddy Lin": (19, "curious, creative, restless", "studies music theory at Oak Hill College"),
    "Tom Moreno": (48, "blunt, hardworking, loyal", "works at The Willows Market and Pharmacy"),
    "Jane Moreno": (46, "cheerful, practical, generous", "keeps the Moreno household running"),
    "Sam Moore": (65, "wise, determined, talkative", "is a retired civil servant"),
    "Jennifer Moore": (63, "gentle, artistic, observant", "paints watercolors at home"),
    "Klaus Mueller": (20, "kind, inquisitive, passionate", "studies sociology at Oak Hill College"),
    "Maria Lopez": (21, "energetic, enthusiastic, inquisitive", "studies physics at Oak Hill College"),
    "Ayesha Khan": (20, "thoughtful, bookish, witty", "studies literature at Oak Hill College"),
    "Wolfgang Schulz": (21, "disciplined, reserved, athletic", "studies chemistry at Oak Hill College"),
    "Latoya Williams": (25, "creative, independent, upbeat", "is a photographer"),
    "Rajiv Patel": (26, "dreamy, easygoing, sincere", "is a painter"),
    "Abigail Chen": (25, "imaginative, focused, friendly", "is a digital animator"),
    "Francisco Lopez": (28, "funny, bold, sociable", "is a stand-up comedian"),
    "Hailey Johnson": (27, "reflective, ambitious, kind", "is a writer"),
    "Arthur Burton": (42, "welcoming, steady, humorous", "runs The Rose and Crown Pub"),
    "Giorgio Rossi": (36, "analytical, calm, curious", "is a mathematician"),
    "Carlos Gomez": (31, "romantic, expressive, gentle", "is a poet"),
    "Ryan Park": (29, "logical, quiet, helpful", "is a software engineer"),
    "Adam Smith": (50, "contemplative, polite, stubborn", "is a philosopher"),
    "Yuriko Yamamoto": (41, "meticulous, candid, dependable", "is a tax lawyer"),
    "Tamara Taylor": (38, "playful, caring, imaginative", "writes children's books"),
    "Carmen Ortiz": (37, "efficient, friendly, frank", "stocks shelves at The Willows Market and Pharmacy"),
}

INVITED = [
    "Tom Moreno", "Carlos Gomez", "Latoya Williams", "Rajiv Patel", "Klaus Mueller", "Maria Lopez",
    "Ayesha Khan", "Abigail Chen", "Hailey Johnson", "Giorgio Rossi", "Eddy Lin", "Ryan Park",
]
ATTENDING = ["Klaus Mueller", "Maria Lopez", "Ayesha Khan", "Abigail Chen", "Rajiv Patel"]
TOLD = ["Jennifer Moore", "Carlos Gomez", "Adam Smith", "Tom Moreno", "John Lin", "Arthur Burton", "Yuriko Yamamoto"]

# mutually acquainted at the start: (a, b, relation as seen from a, relation as seen from b)
PAIRS = [
    ("John Lin", "Mei Lin", "is married to", "is married to"),
    ("John Lin", "Eddy Lin", "is the father of", "is the son of"),
    ("Mei Lin", "Eddy Lin", "is the mother of", "is the son of"),
    ("Tom Moreno", "Jane Moreno", "is married to", "is married to"),
    ("Sam Moore", "Jennifer Moore", "is married to", "is married to"),
    ("John Lin", "Tom Moreno", "works with", "works with"),
    ("John Lin", "Carmen Ortiz", "works with", "works with"),
    ("Tom Moreno", "Carmen Ortiz", "works with", "works with"),
    ("Mei Lin", "Klaus Mueller", "teaches", "is a student of"),
    ("Mei Lin", "Maria Lopez", "teaches", "is a student of"),
    ("Eddy Lin", "Wolfgang Schulz", "studies with", "studies with"),
    ("Eddy Lin", "Klaus Mueller", "studies with", "studies with"),
    ("Arthur Burton", "Giorgio Rossi", "lives next door to", "lives next door to"),
    ("Carlos Gomez", "Ryan Park", "lives next door to", "lives next door to"),
    ("Adam Smith", "Yuriko Yamamoto", "lives next door to", "lives next door to"),
    ("Tamara Taylor", "Carmen Ortiz", "is friends with", "is friends with"),
    ("Tamara Taylor", "Yuriko Yamamoto", "is friends with", "is friends with"),
    ("Giorgio Rossi", "Adam Smith", "debates ideas with", "debates ideas with"),
    ("Ryan Park", "Arthur Burton", "is a regular at the pub of", "serves drinks to"),
    ("Isabella Rodriguez", "Maria Lopez", "is friends with", "is friends with"),
    ("Isabella Rodriguez", "Hailey Johnson", "is friends with", "is friends with"),
    ("Isabella Rodriguez", "Tom Moreno", "serves coffee to", "buys coffee from"),
    ("Isabella Rodriguez", "Arthur Burton", "is friends with", "is friends with"),
    ("Isabella Rodriguez", "Jennifer Moore", "is friends with", "is friends with"),
    ("Sam Moore", "Tom Moreno", "is friends with", "is friends with"),
    ("Sam Moore", "John Lin", "is friends with", "is friends with"),
    ("Sam Moore", "Arthur Burton", "is friends with", "is friends with"),
    ("Jennifer Moore", "Jane Moreno", "is friends with", "is friends with"),
    ("Jennifer Moore", "Latoya Williams", "is friends with", "is friends with"),
    ("Carlos Gomez", "Hailey Johnson", "is friends with", "is friends with"),
    ("Adam Smith", "Ayesha Khan", "is friends with", "is friends with"),
    ("Yuriko Yamamoto", "Jane Moreno", "is friends with", "is friends with"),
    ("Francisco Lopez", "Arthur Burton", "performs at the pub of", "hosts the comedy nights of"),
    ("Rajiv Patel", "Ryan Park", "is friends with", "is friends with"),
]


def housemates():
    out = []
    for home in ("Oak Hill College dorm", "Artist's co-living space"):
        people = HOMES[home]
        for i, a in enumerate(people):
            for b in people[i + 1:]:
                out.append((a, b, "lives with", "lives with"))
    return out


ALL_PAIRS = PAIRS + housemates()


def first(name):
    return name.split()[0]


def origin(area):
    r, c = LOTS[area]
    return GAP + r * (LOT + GAP), GAP + c * (LOT + GAP)


def rect(row, col, h, w):
    return {"row": row, "col": col, "height": h, "width": w}


def home_area(area, residents):
    y, x = origin(area)
    subs = [{
        "name": "kitchen",
        "rect": rect(y + 1, x + 1, 3, LOT - 2),
        "objects": [
            {"name": "stove", "tile": [y + 1, x + 2], "status": "off"},
            {"name": "refrigerator", "tile": [y + 1, x + 5], "status": "closed"},
            {"name": "dining table", "tile": [y + 2, x + 8], "status": "idle"},
        ],
    }]
    n = len(residents)
    cols = 1 if n == 1 else 2
    rows = (n + cols - 1) // cols
    h = (LOT - 5) // rows
    w = (LOT - 2) // cols
    for k, person in enumerate(residents):
        top = y + 4 + (k // cols) * h
        left = x + 1 + (k % cols) * w
        subs.append({
            "name": f"{first(person)}'s room",
            "rect": rect(top, left, h, w),
            "objects": [
                {"name": "bed", "tile": [top, left + 1], "status": "idle"},
                {"name": "desk", "tile": [top, left + 4], "status": "idle"},
            ],
        })
    return {"name": area, "rect": rect(y, x, LOT, LOT), "subareas": subs}


def venue(area, subareas):
    y, x = origin(area)
    subs = []
    for name, (r0, h), objects in subareas:
        subs.append({
            "name": name,
            "rect": rect(y + 1 + r0, x + 1, h, LOT - 2),
            "objects": [{"name": o, "tile": [y + 1 + r0 + dr, x + 1 + dc], "status": s} for o, dr, dc, s in objects],
        })
    return {"name": area, "rect": rect(y, x, LOT, LOT), "subareas": subs}


def world():
    areas = [home_area(a, r) for a, r in HOMES.items()]
    areas.append(venue("Hobbs Cafe", [
        ("cafe", (0, 8), [("counter", 0, 1, "idle"), ("coffee machine", 0, 3, "off"),
                          ("customer seating", 3, 3, "idle"), ("window table", 3, 7, "idle")]),
        ("kitchen", (8, 4), [("stove", 1, 1, "off"), ("cooking area", 1, 5, "idle")]),
    ]))
    areas.append(venue("The Willows Market and Pharmacy", [
        ("store", (0, 7), [("counter", 1, 1, "idle"), ("shelf", 4, 6, "stocked")]),
        ("pharmacy", (7, 5), [("pharmacy counter", 1, 2, "idle")]),
    ]))
    areas.append(venue("Oak Hill College", [
        ("classroom", (0, 6), [("lectern", 0, 5, "idle"), ("student desk", 3, 5, "idle")]),
        ("library", (6, 6), [("library table", 2, 3, "idle"), ("bookshelf", 0, 9, "idle")]),
    ]))
    areas.append(venue("Johnson Park", [
        ("lawn", (0, 6), [("bench", 2, 3, "idle"), ("picnic table", 3, 8, "idle")]),
        ("garden", (6, 6), [("flower bed", 2, 5, "blooming")]),
    ]))
    areas.append(venue("The Rose and Crown Pub", [
        ("pub", (0, 12), [("bar counter", 1, 2, "idle"), ("pub table", 4, 4, "idle"), ("stage", 8, 8, "idle")]),
    ]))
    areas.sort(key=lambda a: LOTS[a["name"]])
    return {"name": "the Ville", "areas": areas}


def collision_map():
    grid = [["." for _ in range(WIDTH)] for _ in range(HEIGHT)]
    for area in LOTS:
        y, x = origin(area)
        for k in range(LOT):
            for t in ((y, x + k), (y + LOT - 1, x + k), (y + k, x), (y + k, x + LOT - 1)):
                grid[t[0]][t[1]] = "#"
        grid[y + LOT - 1][x + LOT // 2] = "."
        grid[y][x + LOT // 2] = "."
    return ["".join(r) for r in grid]


def home_of(name):
    for area, people in HOMES.items():
        if name in people:
            return area
    raise KeyError(name)


def bed(name):
    return f"{home_of(name)}: {first(name)}'s room: bed"


def desk(name):
    return f"{home_of(name)}: {first(name)}'s room: desk"


def table(name):
    return f"{home_of(name)}: kitchen: dining table"


CAFE_SEAT = "Hobbs Cafe: cafe: customer seating"
CAFE_WINDOW = "Hobbs Cafe: cafe: window table"
PUB = "The Rose and Crown Pub: pub: pub table"
PARK = "Johnson Park: lawn: bench"
PICNIC = "Johnson Park: lawn: picnic table"
GARDEN = "Johnson Park: garden: flower bed"
CLASS = "Oak Hill College: classroom: student desk"
LIBRARY = "Oak Hill College: library: library table"

WORK = {
    "Isabella Rodriguez": ("serving customers at the counter", "Hobbs Cafe: cafe: counter"),
    "John Lin": ("working at the pharmacy counter", "The Willows Market and Pharmacy: pharmacy: pharmacy counter"),
    "Mei Lin": ("teaching a philosophy seminar", "Oak Hill College: classroom: lectern"),
    "Eddy Lin": ("attending music theory class", CLASS),
    "Tom Moreno": ("working at the store counter", "The Willows Market and Pharmacy: store: counter"),
    "Jane Moreno": ("tending the house", "Moreno family house: kitchen: stove"),
    "Sam Moore": ("taking a walk in the park", PARK),
    "Jennifer Moore": ("painting watercolors", None),
    "Klaus Mueller": ("writing a research paper in the library", LIBRARY),
    "Maria Lopez": ("studying physics in class", CLASS),
    "Ayesha Khan": ("reading for her literature course", LIBRARY),
    "Wolfgang Schulz": ("studying chemistry in the library", LIBRARY),
    "Latoya Williams": ("editing photographs", None),
    "Rajiv Patel": ("painting a landscape", None),
    "Abigail Chen": ("animating a short film", None),
    "Francisco Lopez": ("writing comedy material", None),
    "Hailey Johnson": ("writing a novel", None),
    "Arthur Burton": ("tending the bar", "The Rose and Crown Pub: pub: bar counter"),
    "Giorgio Rossi": ("working on a proof in the library", LIBRARY),
    "Carlos Gomez": ("writing poetry in the park", PICNIC),
    "Ryan Park": ("writing code", None),
    "Adam Smith": ("reading philosophy in the park", GARDEN),
    "Yuriko Yamamoto": ("preparing tax filings", None),
    "Tamara Taylor": ("writing a children's book", None),
    "Carmen Ortiz": ("stocking shelves", "The Willows Market and Pharmacy: store: shelf"),
}

# where each person eats, by day; None means at work or at home
LUNCH = {
    13: {
        "John Lin": PUB, "Tom Moreno": PUB, "Carmen Ortiz": PUB, "Sam Moore": PUB,
        "Yuriko Yamamoto": PUB, "Francisco Lopez": PUB, "Giorgio Rossi": PUB,
        "Mei Lin": CAFE_WINDOW, "Eddy Lin": CAFE_WINDOW, "Wolfgang Schulz": CAFE_WINDOW,
        "Klaus Mueller": CAFE_SEAT, "Maria Lopez": CAFE_SEAT, "Ayesha Khan": CAFE_SEAT,
        "Latoya Williams": PICNIC, "Rajiv Patel": PICNIC, "Abigail Chen": PICNIC, "Hailey Johnson": PICNIC,
        "Carlos Gomez": PICNIC, "Adam Smith": PICNIC, "Tamara Taylor": PICNIC, "Ryan Park": PICNIC,
        "Jane Moreno": PICNIC, "Jennifer Moore": PICNIC,
    },
    14: {
        "Carlos Gomez": PUB, "Adam Smith": PUB, "Tamara Taylor": PUB, "Ryan Park": PUB,
        "Jane Moreno": PUB, "Jennifer Moore": PUB, "Mei Lin": CAFE_WINDOW, "Sam Moore": PUB,
        "Latoya Williams": CAFE_SEAT, "Rajiv Patel": CAFE_SEAT, "Abigail Chen": CAFE_SEAT, "Hailey Johnson": CAFE_SEAT,
        "John Lin": CAFE_SEAT, "Tom Moreno": CAFE_SEAT, "Carmen Ortiz": PUB,
        "Klaus Mueller": CAFE_SEAT, "Maria Lopez": CAFE_SEAT, "Ayesha Khan": CAFE_SEAT,
        "Yuriko Yamamoto": PICNIC, "Francisco Lopez": PICNIC, "Giorgio Rossi": PICNIC,
        "Eddy Lin": PICNIC, "Wolfgang Schulz": PICNIC,
    },
}

DINNER = {
    13: {
        "Francisco Lopez": PUB, "Ryan Park": PUB, "Giorgio Rossi": PUB, "Adam Smith": PUB, "Tamara Taylor": PUB,
        "Carmen Ortiz": PUB, "Hailey Johnson": PUB, "Latoya Williams": PUB, "Wolfgang Schulz": PUB,
    },
    14: {
        "Tom Moreno": PUB, "Carlos Gomez": PUB, "Hailey Johnson": PUB, "Francisco Lopez": PUB, "Yuriko Yamamoto": PUB, "Wolfgang Schulz": PUB,
    },
}

LUNCH_TIME = {"Sam Moore": "11:30 am"}

# coffee visits to the cafe on the 13th, one invitee at a time
COFFEE = {
    "Tom Moreno": "8:00 am", "Carlos Gomez": "9:00 am", "Latoya Williams": "10:00 am", "Rajiv Patel": "11:00 am",
    "Abigail Chen": "2:00 pm", "Hailey Johnson": "3:00 pm", "Giorgio Rossi": "4:00 pm", "Eddy Lin": "4:30 pm",
    "Ryan Park": "5:00 pm",
}


def items_text(items):
    return ", ".join(f"{k + 1}) {d} at {t} @ {loc}" for k, (d, t, loc) in enumerate(items))


def day_items(name, day):
    """Broad-strokes plan for `name` on day 13 or 14."""
    work, work_loc = WORK[name]
    work_loc = work_loc or desk(name)
    if name == "Isabella Rodriguez":
        if day == 13:
            return [
                ("waking up and getting ready", "7:00 am", desk(name)),
                ("opening Hobbs Cafe", "8:00 am", "Hobbs Cafe: cafe: coffee machine"),
                (work, "8:30 am", work_loc),
                ("relaxing at home", "8:00 pm", desk(name)),
                ("sleeping", "11:00 pm", bed(name)),
            ]
        return [
            ("waking up and getting ready", "7:00 am", desk(name)),
            ("opening Hobbs Cafe", "8:00 am", "Hobbs Cafe: cafe: coffee machine"),
            (work, "8:30 am", work_loc),
            ("hosting a gathering at Hobbs Cafe", "4:00 pm", CAFE_SEAT),
            ("closing up the cafe", "7:00 pm", work_loc),
            ("relaxing at home", "8:00 pm", desk(name)),
            ("sleeping", "11:00 pm", bed(name)),
        ]
    if name == "Arthur Burton":
        return [
            ("waking up and having breakfast", "8:00 am", table(name)),
            ("opening the pub", "10:00 am", work_loc),
            (work, "11:00 am", work_loc),
            ("relaxing at home", "10:00 pm", desk(name)),
            ("sleeping", "11:30 pm", bed(name)),
        ]
    items = [("waking up and having breakfast", "7:00 am", table(name))]
    if day == 13 and name in COFFEE:
        items.append(("getting coffee at Hobbs Cafe", COFFEE[name], CAFE_SEAT))
        start = {"8:00 am": "9:00 am", "9:00 am": "10:00 am", "10:00 am": "11:00 am", "11:00 am": "12:00 pm"}.get(COFFEE[name])
        if start and start != "12:00 pm":
            items.append((work, start, work_loc))
    else:
        items.append((work, "8:30 am", work_loc))
    lunch = LUNCH[day].get(name) or work_loc
    items.append(("having lunch", LUNCH_TIME.get(name, "12:00 pm"), lunch))
    items.append((work, "1:00 pm", work_loc))
    if day == 13 and name in COFFEE and COFFEE[name].endswith("pm"):
        items.append(("getting coffee at Hobbs Cafe", COFFEE[name], CAFE_SEAT))
    if day == 14 and name in ATTENDING:
        items.append(("attending the gathering at Hobbs Cafe", "4:00 pm", CAFE_SEAT))
        items.append(("having dinner", "7:00 pm", table(name)))
    else:
        items.append(("having dinner", "6:00 pm", DINNER[day].get(name) or table(name)))
    items.append(("sleeping", "10:30 pm", bed(name)))
    # keep the coffee break ordered
    order = lambda it: to_minutes(it[1])
    items.sort(key=order)
    return items


def to_minutes(t):
    hm, ap = t.split()
    h, m = (int(v) for v in hm.split(":"))
    h = h % 12 + (12 if ap == "pm" else 0)
    return h * 60 + m


def seed(name):
    age, traits, occupation = PEOPLE[name]
    phrases = [f"{name} {occupation}", f"{name} lives in {home_of(name)}"]
    for a, b, ra, rb in ALL_PAIRS:
        if a == name:
            phrases.append(f"{a} {ra} {b}")
        elif b == name:
            phrases.append(f"{b} {rb} {a}")
    if name == "Isabella Rodriguez":
        phrases.append("Isabella Rodriguez is planning a Valentine's Day party at Hobbs Cafe on February 14th from 5pm to 7pm")
        phrases.append("Isabella Rodriguez wants to invite her regulars to the party")
    if name == "Sam Moore":
        phrases.append("Sam Moore is running for mayor in the local mayoral election")
    return "; ".join(phrases)


def known_areas(name):
    base = ["Hobbs Cafe", "Johnson Park", "The Rose and Crown Pub", "The Willows Market and Pharmacy", "Oak Hill College"]
    return [a for a in base if a != home_of(name)]


def scenario():
    agents = []
    for name in PEOPLE:
        age, traits, _ = PEOPLE[name]
        agents.append({
            "name": name,
            "age": age,
            "traits": traits,
            "seed": seed(name),
            "home": bed(name),
            "known_areas": known_areas(name),
        })
    agents.sort(key=lambda a: a["name"])
    return {
        "schema_version": 1,
        "name": "valentine",
        "epoch": "2023-02-13T00:00:00",
        "map": collision_map(),
        "world": world(),
        "agents": agents,
        "measurements": {
            "relationships": {
                "question": "Do you know {name}?",
                "affirm": ["^yes, i know"],
                "negate": ["don't know", "do not know"],
            },
            "items": [
                {
                    "key": "party",
                    "question": "Did you know there is a Valentine's Day party?",
                    "affirm": ["^yes"],
                    "negate": ["haven't heard", "no,"],
                    "evidence": ["Valentine's Day party"],
                },
                {
                    "key": "candidacy",
                    "question": "Do you know who is running for mayor?",
                    "affirm": ["Sam Moore is running"],
                    "negate": ["don't know"],
                    "evidence": ["mayoral election"],
                },
            ],
            "coordination": [
                {
                    "key": "party",
                    "location": "Hobbs Cafe",
                    "from": "2023-02-14T17:00:00",
                    "to": "2023-02-14T19:00:00",
                    "invited": sorted(INVITED),
                }
            ],
        },
    }


def entry(template, reply, **when):
    e = {"template": template, "reply": reply}
    if when:
        e["when"] = {slot: ({"exact": v[1:]} if v.startswith("=") else {"contains": v}) for slot, v in when.items()}
    return e


ISA = "=Isabella Rodriguez"
SAM = "=Sam Moore"


def script():
    s = []
    # importance
    for needle, score in [
        ("cleaning up the room", "2"),
        ("asking your crush out on a date", "8"),
        ("Valentine's Day party", "8"),
        ("mayoral election", "8"),
        ("is burning", "8"),
        ("Conversation between", "5"),
        ("decided to", "3"),
        ("plans to be", "2"),
        ("keeps a steady routine", "4"),
        ("values the people", "4"),
    ]:
        s.append(entry("importance", score, memory=needle))
    s.append(entry("importance", "1"))

    # reflection
    s.append(entry("reflection_questions", "1. What has been happening lately?\n2. Who has been around recently?\n3. What matters most right now?"))
    s.append(entry("reflection_insights", "1. {{name}} keeps a steady routine (because of 1, 2)\n2. {{name}} values the people around them (because of 1, 3)", statements="3. "))
    s.append(entry("reflection_insights", "1. {{name}} keeps a steady routine (because of 1, 2)", statements="2. "))
    s.append(entry("reflection_insights", "1. {{name}} keeps a steady routine (because of 1)"))

    # plans: revisions keep the rest of the day
    s.append(entry("day_plan", "{{reaction}} at {{time}}, {{remaining}}", revision="has decided to"))
    for name in sorted(PEOPLE):
        if name in ATTENDING:
            s.append(entry("day_plan", items_text(day_items(name, 14)), name="=" + name, today="February 14",
                           summary="Valentine's Day party"))
            alt = [it for it in day_items(name, 14) if "gathering" not in it[0]]
            alt = [(d, "6:00 pm", DINNER[14].get(name) or table(name)) if d == "having dinner" else (d, t, l) for d, t, l in alt]
            s.append(entry("day_plan", items_text(alt), name="=" + name, today="February 14"))
        for day in (13, 14):
            s.append(entry("day_plan", items_text(day_items(name, day)), name="=" + name, today=f"February {day}"))
    s.append(entry("decompose_hour", "{{task}}"))
    s.append(entry("decompose_minute", "{{task}}"))

    # reactions
    s.append(entry("should_react", "Yes: turn off the burning stove", observation="is burning"))
    s.append(entry("should_react", "No, keep serving customers.", name=ISA, context="already invited"))
    for x in INVITED:
        s.append(entry("should_react", f"Yes: invite {x} to my party", name=ISA, observed="=" + x))
    s.append(entry("should_react", "No, continue the plan.", name=SAM, context="already told"))
    for x in TOLD:
        s.append(entry("should_react", f"Yes: talk to {x} about my campaign for mayor", name=SAM, observed="=" + x))
    s.append(entry("should_react", "No, keep to the plan.", name=SAM, observation="is having lunch"))
    s.append(entry("should_react", "Yes: start planning a campaign to run for mayor against Sam Moore",
                   name="=John Lin", observation="inner voice"))
    s.append(entry("should_react", "Yes: act on that thought right away", observation="inner voice"))
    s.append(entry("should_react", "No", context="already talked"))
    s.append(entry("should_react", "Yes: chat with {{observed}}", status="having lunch", observation="is having lunch"))
    s.append(entry("should_react", "No"))

    for x in INVITED:
        s.append(entry("context_relationship", f"Isabella already invited {x} to the Valentine's Day party.",
                       name=ISA, observed="=" + x, statements=f"Conversation between Isabella Rodriguez and {x}"))
    for x in TOLD:
        s.append(entry("context_relationship", f"Sam already told {x} about the local mayoral election.",
                       name=SAM, observed="=" + x, statements=f"Conversation between Sam Moore and {x}"))
    s.append(entry("context_relationship", "{{name}} has already talked with {{observed}} today.", statements="Conversation between"))
    s.append(entry("context_relationship", "{{name}} recognizes {{observed}} from around town."))

    # dialogue
    s.append(entry("dialogue_first", "Hi {{listener_first_name}}! I'm hosting a Valentine's Day party at Hobbs Cafe on February 14th from 5pm to 7pm. Would you like to come?",
                   name=ISA, intent="to my party"))
    s.append(entry("dialogue_first", "Hi {{listener_first_name}}, I'm running for mayor in the local mayoral election and I'd appreciate your support.",
                   name=SAM, intent="my campaign"))
    s.append(entry("dialogue_first", "Hi {{listener_first_name}}, how is your day going?"))
    s.append(entry("dialogue_next", "Wonderful, see you there! [END]", name=ISA, history="I'd love to come"))
    s.append(entry("dialogue_next", "That sounds lovely, I'd love to come!", listener=ISA, history="Valentine's Day party"))
    s.append(entry("dialogue_next", "Thank you, I appreciate it! [END]", name=SAM, history="Good luck with your campaign"))
    s.append(entry("dialogue_next", "Good luck with your campaign, Sam!", listener=SAM, history="mayoral election"))
    s.append(entry("dialogue_next", "Glad to hear it. See you around! [END]", history="Pretty good"))
    s.append(entry("dialogue_next", "Pretty good, thanks for asking!", history="how is your day going"))
    s.append(entry("dialogue_next", "It was nice talking. [END]"))

    # summaries
    for name, (_, _, occupation) in sorted(PEOPLE.items()):
        s.append(entry("summary_occupation", f"{{{{name}}}} {occupation}.", name="=" + name))
    for t in ("summary_core", "summary_feeling"):
        s.append(entry(t, "{{name}} is looking forward to the Valentine's Day party at Hobbs Cafe.", statements="Valentine's Day party"))
    s.append(entry("summary_core", "{{name}} is thoughtful and kind to neighbors."))
    s.append(entry("summary_occupation", "{{name}} keeps busy with daily work."))
    s.append(entry("summary_feeling", "{{name}} feels content with how things are going."))

    # world
    s.append(entry("object_state", "off", action="turn off"))
    s.append(entry("object_state", "brewing coffee", object="=coffee machine", action="opening"))
    s.append(entry("object_state", "{{status}}"))
    for needle, emo in [
        ("sleep", "😴"), ("turn off", "🧯"), ("conversing", "💬"), ("gathering", "🎉"), ("coffee", "☕"),
        ("lunch", "🥪"), ("dinner", "🍝"), ("breakfast", "🍳"), ("serving", "☕"), ("opening", "🔑"),
        ("writing", "✍️"), ("paint", "🎨"), ("park", "🌳"), ("class", "📚"), ("library", "📚"),
        ("read", "📖"), ("campaign", "🗳️"),
    ]:
        s.append(entry("emoji", emo, action=needle))
    s.append(entry("emoji", "🙂"))

    # interviews
    s.append(entry("interview_answer", "Yes, I heard about the Valentine's Day party at Hobbs Cafe.",
                   question="Valentine's Day party", memories="Valentine's Day party"))
    s.append(entry("interview_answer", "No, I haven't heard about any party.", question="Valentine's Day party"))
    s.append(entry("interview_answer", "Yes, Sam Moore is running for mayor in the local mayoral election.",
                   question="running for mayor", memories="mayoral election"))
    s.append(entry("interview_answer", "I don't know who is running.", question="running for mayor"))
    for x in sorted(PEOPLE):
        s.append(entry("interview_answer", f"Yes, I know {x}.", question=f"Do you know {x}?", memories=x))
    s.append(entry("interview_answer", "No, I don't know them.", question="Do you know "))
    s.append(entry("interview_answer", "Hi, I'm {{name}}. {{summary}}", question="introduction of yourself"))
    s.append(entry("interview_answer", "{{summary}}", question="occupation"))
    s.append(entry("interview_answer", "{{first_name}} thinks for a moment and says: that's a good question, I'd have to think about it."))
    return {"schema_version": 1, "entries": s}


def main():
    with open(os.path.join(HERE, "scenario.json"), "w") as f:
        json.dump(scenario(), f, indent=1, ensure_ascii=False)
        f.write("\n")
    with open(os.path.join(HERE, "script.json"), "w") as f:
        json.dump(script(), f, indent=1, ensure_ascii=False)
        f.write("\n")


if __name__ == "__main__":
    main()
