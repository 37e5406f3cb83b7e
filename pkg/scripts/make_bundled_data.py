"""Regenerate the bundled benchmark network files under src/causalorder/data.

Structures are fixed; CPT parameters are uniform-random rows drawn once with
a fixed seed and checked in, since only the structures drive the test suite.
Run from the repository root:  python scripts/make_bundled_data.py
"""

from __future__ import annotations

import pathlib

import numpy as np

SEED = 20240613
OUT = pathlib.Path(__file__).resolve().parent.parent / "src" / "causalorder" / "data"

GRAPHS = {
    "earthquake": {
        "context": "Model factors influencing the probability of a burglary",
        "nodes": [
            ("Burglary", "burglar entering the house", ("no", "yes")),
            ("Earthquake", "earthquake hitting the area", ("no", "yes")),
            ("Alarm", "home alarm going off", ("no", "yes")),
            ("JohnCalls", "first neighbor calling to report the alarm", ("no", "yes")),
            ("MaryCalls", "second neighbor calling to report the alarm", ("no", "yes")),
        ],
        "edges": [
            ("Burglary", "Alarm"),
            ("Earthquake", "Alarm"),
            ("Alarm", "JohnCalls"),
            ("Alarm", "MaryCalls"),
            ("JohnCalls", "MaryCalls"),
        ],
    },
    "cancer": {
        "context": "Model the relation between various variables responsible for "
                   "causing Cancer and its possible outcomes",
        "nodes": [
            ("Pollution", "exposure to pollutants", ("low", "high")),
            ("Smoker", "smoking habit", ("no", "yes")),
            ("Cancer", "cancer", ("no", "yes")),
            ("Xray", "getting positive xray result", ("no", "yes")),
            ("Dyspnoea", "dyspnoea", ("no", "yes")),
        ],
        "edges": [
            ("Pollution", "Cancer"),
            ("Smoker", "Cancer"),
            ("Cancer", "Xray"),
            ("Cancer", "Dyspnoea"),
        ],
    },
    "survey": {
        "context": "Model a hypothetical survey whose aim is to investigate the "
                   "usage patterns of different means of transport",
        "nodes": [
            ("A", "age of people using transport", ("young", "adult", "old")),
            ("S", "sex, male or female", ("M", "F")),
            ("E", "education, up to high school or university degree", ("high", "uni")),
            ("O", "occupation, employee or self-employed", ("emp", "self")),
            ("R", "residence, the size of the city the individual lives in",
             ("small", "big")),
            ("T", "travel, the means of transport favoured by the individual",
             ("car", "train", "other")),
        ],
        "edges": [
            ("A", "E"),
            ("S", "E"),
            ("E", "O"),
            ("E", "R"),
            ("O", "T"),
            ("R", "T"),
        ],
    },
    "asia": {
        "context": "Model the possible respiratory problems someone can have who has "
                   "recently visited Asia and is experiencing shortness of breath",
        "nodes": [
            ("asia", "visit to Asian countries with high exposure to pollutants",
             ("no", "yes")),
            ("tub", "tuberculosis", ("no", "yes")),
            ("smoke", "smoking habit", ("no", "yes")),
            ("lung", "lung cancer", ("no", "yes")),
            ("bronc", "bronchitis", ("no", "yes")),
            ("either", "either tuberculosis or lung cancer", ("no", "yes")),
            ("xray", "getting positive xray result", ("no", "yes")),
            ("dysp", "dyspnoea", ("no", "yes")),
        ],
        "edges": [
            ("asia", "tub"),
            ("smoke", "lung"),
            ("smoke", "bronc"),
            ("tub", "either"),
            ("lung", "either"),
            ("either", "xray"),
            ("either", "dysp"),
            ("bronc", "dysp"),
        ],
    },
    "child": {
        "context": "Model congenital heart disease in babies",
        "nodes": [
            ("BirthAsphyxia", "lack of oxygen to the blood during the infant's birth",
             ("no", "yes")),
            ("Disease", "presence of an illness", ("no", "yes")),
            ("Age", "age of infant at disease presentation", ("no", "yes")),
            ("LVH", "thickening of the left ventricle", ("no", "yes")),
            ("DuctFlow", "blood flow across the ductus arteriosus", ("no", "yes")),
            ("CardiacMixing", "mixing of oxygenated and deoxygenated blood",
             ("no", "yes")),
            ("LungParench", "the state of the blood vessels in the lungs",
             ("no", "yes")),
            ("LungFlow", "low blood flow in the lungs", ("no", "yes")),
            ("Sick", "presence of an illness", ("no", "yes")),
            ("HypDistrib", "low oxygen areas equally distributed around the body",
             ("no", "yes")),
            ("HypoxiaInO2", "hypoxia when breathing oxygen", ("no", "yes")),
            ("CO2", "level of carbon dioxide in the body", ("no", "yes")),
            ("ChestXray", "having a chest x-ray", ("no", "yes")),
            ("Grunting", "grunting in infants", ("no", "yes")),
            ("LVHreport", "report of having left ventricular hypertrophy",
             ("no", "yes")),
            ("LowerBodyO2", "level of oxygen in the lower body", ("no", "yes")),
            ("RUQO2", "level of oxygen in the right upper quadricep muscle",
             ("no", "yes")),
            ("CO2Report", "a document reporting high levels of CO2 levels in blood",
             ("no", "yes")),
            ("XrayReport", "report of having a chest x-ray", ("no", "yes")),
            ("GruntingReport", "report of infant grunting", ("no", "yes")),
        ],
        "edges": [
            ("BirthAsphyxia", "Disease"),
            ("Disease", "Age"),
            ("Disease", "LVH"),
            ("Disease", "DuctFlow"),
            ("Disease", "CardiacMixing"),
            ("Disease", "LungParench"),
            ("Disease", "LungFlow"),
            ("Disease", "Sick"),
            ("LVH", "LVHreport"),
            ("DuctFlow", "HypDistrib"),
            ("CardiacMixing", "HypDistrib"),
            ("CardiacMixing", "HypoxiaInO2"),
            ("LungParench", "HypoxiaInO2"),
            ("LungParench", "CO2"),
            ("LungParench", "ChestXray"),
            ("LungParench", "Grunting"),
            ("LungFlow", "ChestXray"),
            ("Sick", "Grunting"),
            ("Sick", "Age"),
            ("HypDistrib", "LowerBodyO2"),
            ("HypoxiaInO2", "LowerBodyO2"),
            ("HypoxiaInO2", "RUQO2"),
            ("CO2", "CO2Report"),
            ("ChestXray", "XrayReport"),
            ("Grunting", "GruntingReport"),
        ],
    },
}


def asia_m_spec():
    """Asia with node `either` removed; every (parent, child) of `either`
    is contracted to a direct edge."""
    asia = GRAPHS["asia"]
    removed = "either"
    parents = [s for s, d in asia["edges"] if d == removed]
    children = [d for s, d in asia["edges"] if s == removed]
    edges = [(s, d) for s, d in asia["edges"] if removed not in (s, d)]
    edges += [(p, c) for p in parents for c in children]
    nodes = [entry for entry in asia["nodes"] if entry[0] != removed]
    return {"context": asia["context"], "nodes": nodes, "edges": sorted(set(edges))}


def micro_probs(rng, width):
    """A probability row in integer millionths so the file sums exactly to 1."""
    p = rng.dirichlet(np.ones(width))
    m = np.round(p * 1_000_000).astype(int)
    m[-1] = 1_000_000 - m[:-1].sum()
    if m[-1] < 0:  # pathological rounding; rebalance against the largest entry
        m[np.argmax(m[:-1])] += m[-1]
        m[-1] = 0
    return m / 1_000_000.0


def write_bn(name, spec, rng):
    node_names = [n for n, _, _ in spec["nodes"]]
    states = {n: s for n, _, s in spec["nodes"]}
    parents = {n: [s for s, d in spec["edges"] if d == n] for n in node_names}
    # Keep parent lists in node declaration order for stable CPT layout.
    order = {n: i for i, n in enumerate(node_names)}
    out = [f"bn {name}", f"context: {spec['context']}", ""]
    for node, desc, node_states in spec["nodes"]:
        ps = sorted(parents[node], key=order.__getitem__)
        n_combos = 1
        for p in ps:
            n_combos *= len(states[p])
        out.append(f"node {node} {{")
        out.append(f"  description: {desc};")
        out.append(f"  states: {', '.join(node_states)};")
        out.append(f"  parents: {', '.join(ps)};")
        out.append("  cpt:")
        for _ in range(n_combos):
            row = micro_probs(rng, len(node_states))
            out.append("    " + " ".join(f"{v:.6f}" for v in row))
        out.append("}")
        out.append("")
    (OUT / f"{name}.bn").write_text("\n".join(out), encoding="utf-8")


def write_chain_scm():
    text = "\n".join([
        "scm chain",
        "",
        "node X {",
        "  parents: ;",
        "  noise: 1.0;",
        "}",
        "",
        "node Y {",
        "  parents: X;",
        "  coeff: X:2.0;",
        "  noise: 1.0;",
        "}",
        "",
    ])
    (OUT / "chain.scm").write_text(text, encoding="utf-8")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)
    specs = dict(GRAPHS)
    specs["asia_m"] = asia_m_spec()
    for name in ("earthquake", "cancer", "survey", "asia", "asia_m", "child"):
        write_bn(name, specs[name], rng)
    write_chain_scm()
    print(f"wrote {len(specs) + 1} files to {OUT}")


if __name__ == "__main__":
    main()
