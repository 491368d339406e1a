"""Regenerate the bundled example models and data under src/pleak/scenarios.

Run from the repository root: ``python3 scripts/make_scenarios.py``.
The output is deterministic.
"""
import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "src" / "pleak" / "scenarios"

SHIP_NAMES = [
    "alpha", "bravo", "carmen", "gamma", "delta", "echo", "fiona", "farmi", "golf", "hotel",
    "india", "juliet", "kilo", "lima", "mike", "nova", "oscar", "papa", "quebec", "romeo",
    "sierra", "tango", "umbra", "victor", "whiskey", "xray", "yankee", "zulu", "aurora", "boreas",
    "cygnus", "draco", "eos", "fornax", "gemini", "hydra", "ion", "janus", "kepler", "lyra",
    "mensa", "norma", "orion", "pavo", "rigel", "sagitta", "taurus", "ursa", "vela", "wolf",
    "xena", "ymir", "zephyr",
]

PORTS = [
    # port_id, name, latitude, longitude, harbordepth, offloadcapacity, offloadtime
    (1, "alma", 150.0, 150.0, 12.0, 40.0, 2.0),
    (2, "bora", 40.0, 260.0, 9.0, 25.0, 3.0),
    (3, "cala", 270.0, 30.0, 15.0, 60.0, 1.5),
    (4, "dune", 60.0, 60.0, 7.0, 15.0, 2.0),
    (5, "esta", 250.0, 240.0, 11.0, 35.0, 2.5),
]

BERTHS = [
    # berth_id, port_id, maxlength
    (1, 1, 220.0), (2, 1, 200.0), (3, 2, 150.0), (4, 3, 260.0), (5, 4, 120.0), (6, 5, 180.0),
]


def write(path: str, text: str) -> None:
    p = ROOT / path
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def write_json(path: str, doc) -> None:
    write(path, json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def csv_text(header, rows) -> str:
    def fmt(v):
        return repr(v) if isinstance(v, float) else str(v)
    return ",".join(header) + "\n" + "".join(",".join(fmt(v) for v in r) + "\n" for r in rows)


def arrival(ship, port):
    return math.hypot(ship[1] - port[2], ship[2] - port[3]) / ship[3]


def make_ships():
    rng = random.Random(20190415)
    alma = PORTS[0]
    ships = []
    for i, name in enumerate(SHIP_NAMES):
        while True:
            lat = round(rng.uniform(0, 300), 1)
            lon = round(rng.uniform(0, 300), 1)
            speed = float(rng.randint(21, 90))
            length = float(rng.randint(80, 240))
            draft = round(rng.uniform(4.0, 14.0), 1)
            cargo = float(rng.randint(5, 90))
            ship = (name, lat, lon, speed, length, draft, cargo)
            # every ship but the designated fastest one arrives at alma clearly later
            if arrival(ship, alma) >= 1.5:
                break
        ships.append(ship)
    # "bravo" is 10 units from alma at the slowest admissible speed: arrival 0.5
    ships[1] = ("bravo", 156.0, 158.0, 20.0, 150.0, 8.0, 30.0)
    # the two sensitive rows fit alma's depth and both of its berths
    for i in (3, 7):
        name, lat, lon, speed, _, _, cargo = ships[i]
        ships[i] = (name, lat, lon, speed, 190.0, 8.5, cargo)
    return ships


SHIP_SCHEMA = """CREATE TABLE ship (
  name TEXT,
  latitude FLOAT8,
  longitude FLOAT8,
  maxspeed FLOAT8,
  length FLOAT8,
  draft FLOAT8,
  cargo FLOAT8
);
"""

PORT_SCHEMA = """CREATE TABLE port (
  port_id INT8,
  name TEXT,
  latitude FLOAT8,
  longitude FLOAT8,
  harbordepth FLOAT8,
  offloadcapacity FLOAT8,
  offloadtime FLOAT8
);
"""

BERTH_SCHEMA = """CREATE TABLE berth (
  berth_id INT8,
  port_id INT8,
  maxlength FLOAT8
);
"""

PARAMETERS_SCHEMA = """CREATE TABLE parameters (
  shipname TEXT,
  deadline FLOAT8
);
"""

DIST = """-- planar stand-in for the distance between two coordinates
CREATE FUNCTION dist(lat1 FLOAT8, lon1 FLOAT8, lat2 FLOAT8, lon2 FLOAT8) RETURNS FLOAT8
  AS sqrt((lat1 - lat2) ^ 2 + (lon1 - lon2) ^ 2);
"""

REACHABLE = DIST + """
SELECT dist(s.latitude, s.longitude, p.latitude, p.longitude) / s.maxspeed AS arrival,
       p.port_id AS port_id
INTO reachable_ports
FROM ship AS s, port AS p, parameters AS par
WHERE s.name = par.shipname
  AND dist(s.latitude, s.longitude, p.latitude, p.longitude) / s.maxspeed <= par.deadline;
"""

FEASIBLE = """SELECT rp.port_id AS port_id, rp.arrival AS arrival
INTO feasible_ports
FROM reachable_ports AS rp, port AS p, ship AS s, parameters AS par
WHERE rp.port_id = p.port_id
  AND s.name = par.shipname
  AND s.draft < p.harbordepth
  AND s.cargo <= p.offloadcapacity * p.offloadtime;
"""

ASSIGN = """SELECT fp.port_id AS port_id, b.berth_id AS berth_id, fp.arrival AS arrival
INTO port_assignment
FROM feasible_ports AS fp, berth AS b, ship AS s, parameters AS par
WHERE fp.port_id = b.port_id
  AND s.name = par.shipname
  AND s.length <= b.maxlength;
"""

GLOBAL_DISTINCT = """-- ships able to reach some port with a berth within 3 time units
SELECT DISTINCT s.name
INTO ship_count
FROM ship AS s, port AS p, berth AS b
WHERE b.port_id = p.port_id
  AND sqrt((s.latitude - p.latitude) ^ 2 + (s.longitude - p.longitude) ^ 2) / s.maxspeed <= 3.0;
"""

COUNT_QUERY = """-- ships that reach alma within 3 time units
SELECT COUNT(*)
INTO arrivals
FROM ship AS s, port AS p
WHERE p.name = 'alma'
  AND sqrt((s.latitude - p.latitude) ^ 2 + (s.longitude - p.longitude) ^ 2) / s.maxspeed <= 3.0;
"""

MIN_QUERY = """-- earliest arrival at alma
SELECT MIN(sqrt((s.latitude - p.latitude) ^ 2 + (s.longitude - p.longitude) ^ 2) / s.maxspeed)
INTO first_arrival
FROM ship AS s, port AS p
WHERE p.name = 'alma';
"""

MAX_QUERY = """-- latest arrival at alma
SELECT MAX(sqrt((s.latitude - p.latitude) ^ 2 + (s.longitude - p.longitude) ^ 2) / s.maxspeed)
INTO last_arrival
FROM ship AS s, port AS p
WHERE p.name = 'alma';
"""

SUM_QUERY = """-- total length over the ship and berth pairs that alma can host
SELECT SUM(s.length)
INTO berth_load
FROM ship AS s, berth AS b, port AS p
WHERE b.port_id = p.port_id
  AND p.name = 'alma'
  AND s.draft < p.harbordepth;
"""

LOCATION_NORM = """rows: all;
cols: latitude, longitude;
u = lp 2.0 latitude longitude;
return linf u;
"""

SHIP_NORM = """rows: 3, 7;
cols: latitude, longitude, length;
u = lp 2.0 latitude longitude;
v1 = scaleNorm 0.2 u;
v2 = scaleNorm 1.0 length;
z = lp 1.0 v1 v2;
return linf z;
"""

PORT_NORM = """rows: all;
cols: harbordepth, offloadcapacity, offloadtime;
u = lp 1.0 harbordepth offloadcapacity offloadtime;
return linf u;
"""

ROW_NORM = """rows: all;
cols: none;
G: 1.0;
"""

ATTACKER = """ship.latitude range 0 300;
ship.longitude range 0 300;
ship.maxspeed range 20 90;
ship.length range 50 260;
ship.name total 53;
port.harbordepth range 5 20;
port.offloadcapacity range 10 100;
port.offloadtime range 1 4;
"""

SENSITIVE = """leak ship.latitude approx 5, ship.longitude approx 5 cost 1.0;
"""


def single_task_model(task_id, label, inputs, output, script, objects, pool="Analyst", extra=None):
    doc = {
        "pools": [{
            "id": "analyst", "name": pool,
            "nodes": [
                {"id": "start", "kind": "startEvent"},
                {"id": task_id, "kind": "task", "label": label, "inputs": inputs, "outputs": [output],
                 "scriptFile": script},
                {"id": "end", "kind": "endEvent"},
            ],
            "flows": [["start", task_id], [task_id, "end"]],
        }],
        "messageFlows": [],
        "dataObjects": objects + [{"name": output, "pool": "analyst"}],
    }
    doc.update(extra or {})
    return doc


def obj(name, pool="analyst", data=True, norm=None, schema=None):
    out = {"name": name, "pool": pool, "schemaFile": f"schema/{schema or name}.sql"}
    if data:
        out["dataFile"] = f"data/{name}.csv"
    if norm:
        out["normFile"] = f"norms/{norm}"
    return out


def make_ships_dir(ships):
    d = "ships/"
    write(d + "schema/ship.sql", SHIP_SCHEMA)
    write(d + "schema/port.sql", PORT_SCHEMA)
    write(d + "schema/berth.sql", BERTH_SCHEMA)
    write(d + "schema/parameters.sql", PARAMETERS_SCHEMA)
    write(d + "data/ship.csv", csv_text(["name", "latitude", "longitude", "maxspeed", "length", "draft", "cargo"], ships))
    write(d + "data/port.csv", csv_text(["port_id", "name", "latitude", "longitude", "harbordepth",
                                         "offloadcapacity", "offloadtime"], PORTS))
    write(d + "data/berth.csv", csv_text(["berth_id", "port_id", "maxlength"], BERTHS))
    write(d + "data/parameters.csv", csv_text(["shipname", "deadline"], [("gamma", 4.0)]))
    for name, text in (("reachable_ports.sql", REACHABLE), ("feasible_ports.sql", FEASIBLE),
                       ("port_assignment.sql", ASSIGN), ("global_distinct.sql", GLOBAL_DISTINCT),
                       ("global_plain.sql", GLOBAL_DISTINCT.replace("SELECT DISTINCT", "SELECT")),
                       ("count.sql", COUNT_QUERY), ("min.sql", MIN_QUERY), ("max.sql", MAX_QUERY),
                       ("sum.sql", SUM_QUERY)):
        write(d + "sql/" + name, text)
    write(d + "norms/location.norm", LOCATION_NORM)
    write(d + "norms/ship.norm", SHIP_NORM)
    write(d + "norms/port.norm", PORT_NORM)
    write(d + "policy/attacker.txt", ATTACKER)
    write(d + "policy/sensitive.txt", SENSITIVE)

    tables = {"ship": obj("ship"), "port": obj("port"), "berth": obj("berth"), "parameters": obj("parameters")}
    write_json(d + "workflow.json", {
        "pools": [{
            "id": "manager", "name": "Ship manager",
            "nodes": [
                {"id": "start", "kind": "startEvent"},
                {"id": "reach", "kind": "task", "label": "Compute reachable ports",
                 "inputs": ["ship", "port", "parameters"], "outputs": ["reachable_ports"],
                 "scriptFile": "sql/reachable_ports.sql"},
                {"id": "feasible", "kind": "task", "label": "Select feasible ports",
                 "inputs": ["reachable_ports", "port", "ship", "parameters"], "outputs": ["feasible_ports"],
                 "scriptFile": "sql/feasible_ports.sql"},
                {"id": "assign", "kind": "task", "label": "Assign port",
                 "inputs": ["feasible_ports", "berth", "ship", "parameters"], "outputs": ["port_assignment"],
                 "scriptFile": "sql/port_assignment.sql"},
                {"id": "end", "kind": "endEvent"},
            ],
            "flows": [["start", "reach"], ["reach", "feasible"], ["feasible", "assign"], ["assign", "end"]],
        }],
        "messageFlows": [],
        "dataObjects": [dict(tables[t], pool="manager") for t in ("ship", "port", "berth", "parameters")] + [
            {"name": n, "pool": "manager"} for n in ("reachable_ports", "feasible_ports", "port_assignment")],
    })
    for variant in ("distinct", "plain"):
        write_json(d + f"global_{variant}.json", single_task_model(
            "count_ships", "Count reachable ships", ["ship", "port", "berth"], "ship_count",
            f"sql/global_{variant}.sql", [obj("ship", data=False), obj("port", data=False), obj("berth", data=False)]))
    policy = {"attackerFile": "policy/attacker.txt", "sensitiveFile": "policy/sensitive.txt"}
    write_json(d + "count.json", single_task_model(
        "count", "Count arrivals", ["ship", "port"], "arrivals", "sql/count.sql",
        [obj("ship", norm="location.norm"), obj("port")], extra=policy))
    write_json(d + "min.json", single_task_model(
        "first", "Earliest arrival", ["ship", "port"], "first_arrival", "sql/min.sql",
        [obj("ship", norm="location.norm"), obj("port")], extra=policy))
    write_json(d + "max.json", single_task_model(
        "last", "Latest arrival", ["ship", "port"], "last_arrival", "sql/max.sql",
        [obj("ship", norm="location.norm"), obj("port")], extra=policy))
    write_json(d + "sum.json", single_task_model(
        "load", "Berth load", ["ship", "berth", "port"], "berth_load", "sql/sum.sql",
        [obj("ship", norm="ship.norm"), obj("berth"), obj("port", norm="port.norm")], extra=policy))


def make_berth_dir():
    d = "berth/"
    write(d + "schema/ship.sql", """CREATE TABLE ship (
  name TEXT,
  length FLOAT8
);
""")
    write(d + "schema/port.sql", """CREATE TABLE port (
  port_id INT8,
  name TEXT
);
""")
    write(d + "schema/berth.sql", BERTH_SCHEMA)
    write(d + "data/ship.csv", csv_text(["name", "length"], [
        ("alpha", 120.0), ("bravo", 180.0), ("gamma", 150.0), ("delta", 230.0)]))
    write(d + "data/port.csv", csv_text(["port_id", "name"], [(1, "alma"), (2, "bora"), (3, "cala")]))
    write(d + "data/berth.csv", csv_text(["berth_id", "port_id", "maxlength"], [
        (1, 1, 240.0), (2, 1, 200.0), (3, 2, 250.0), (4, 3, 250.0)]))
    write(d + "norms/rows.norm", ROW_NORM)
    write(d + "sql/assign.sql", """-- every ship and alma berth it fits
SELECT s.name AS ship, b.berth_id AS berth
INTO berth_options
FROM ship AS s, port AS p, berth AS b
WHERE b.port_id = p.port_id
  AND p.name = 'alma'
  AND s.length <= b.maxlength;
""")
    write_json(d + "model.json", single_task_model(
        "assign", "Assign berths", ["ship", "port", "berth"], "berth_options", "sql/assign.sql",
        [obj("ship", norm="rows.norm"), obj("port"), obj("berth")]))


def make_aid_dir():
    nation = {
        "id": "nation", "name": "Aid requesting country",
        "nodes": [
            {"id": "n_start", "kind": "startEvent"},
            {"id": "n_request", "kind": "task", "label": "Request aid", "outputs": ["aid request"]},
            {"id": "n_reach", "kind": "task", "label": "Compute reachable ports", "inputs": ["port"],
             "stereotype": {"kind": "MPC", "groupId": "g1"}},
            {"id": "n_feasible", "kind": "task", "label": "Select feasible ports", "outputs": ["feasible ports"],
             "stereotype": {"kind": "MPC", "groupId": "g2"}},
            {"id": "n_assign", "kind": "task", "label": "Assign port",
             "inputs": ["feasible ports", "berth", "slot"], "outputs": ["port assignment"],
             "stereotype": {"kind": "MPC", "groupId": "g3"}},
            {"id": "n_end", "kind": "endEvent"},
        ],
        "flows": [["n_start", "n_request"], ["n_request", "n_reach"], ["n_reach", "n_feasible"],
                  ["n_feasible", "n_assign"], ["n_assign", "n_end"]],
    }
    country = {
        "id": "country_a", "name": "Country A",
        "nodes": [
            {"id": "a_start", "kind": "startEvent", "label": "Aid request received"},
            {"id": "a_reach", "kind": "task", "label": "Compute reachable ports", "inputs": ["ship", "deadline"],
             "outputs": ["reachable ports"], "stereotype": {"kind": "MPC", "groupId": "g1"}},
            {"id": "a_feasible", "kind": "task", "label": "Select feasible ports", "inputs": ["reachable ports"],
             "stereotype": {"kind": "MPC", "groupId": "g2"}},
            {"id": "a_assign", "kind": "task", "label": "Assign port", "outputs": ["port assignment"],
             "stereotype": {"kind": "MPC", "groupId": "g3"}},
            {"id": "a_end", "kind": "endEvent"},
        ],
        "flows": [["a_start", "a_reach"], ["a_reach", "a_feasible"], ["a_feasible", "a_assign"],
                  ["a_assign", "a_end"]],
    }
    objects = [{"name": n, "pool": "nation"} for n in
               ("aid request", "port", "berth", "slot", "feasible ports", "port assignment")]
    objects += [{"name": n, "pool": "country_a"} for n in ("ship", "deadline", "reachable ports")]
    doc = {"pools": [nation, country],
           "messageFlows": [{"source": "n_request", "target": "a_start", "data": ["aid request"]}],
           "dataObjects": objects}
    write_json("aid/model.json", doc)
    broken = json.loads(json.dumps(doc))
    for node in broken["pools"][0]["nodes"]:
        if node["id"] == "n_feasible":
            del node["stereotype"]
    write_json("aid/model_invalid.json", broken)


def main():
    ships = make_ships()
    make_ships_dir(ships)
    make_berth_dir()
    make_aid_dir()


if __name__ == "__main__":
    main()
