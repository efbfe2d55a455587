"""Regenerate the bundled demo inputs and scripted answers.

Writes corpus.jsonl, answers.yaml, labels.tsv, review.txt and config.yaml
into src/esgkg/demo. Afterwards record the fixtures with

    esgkg --config src/esgkg/demo/config.yaml run --record --out /tmp/demo-record

which replays every prompt through the scripted provider and stores each
exchange under its prompt digest in demo/fixtures.
"""

from __future__ import annotations

import json
from pathlib import Path

import yaml

DEMO = Path(__file__).resolve().parents[1] / "src" / "esgkg" / "demo"


def j(obj) -> str:
    return "```json\n" + json.dumps(obj, ensure_ascii=False) + "\n```"


COMMENTS = {
    1: "Companies should avoid harming people's fundamental rights wherever they operate, including "
       "the land, health and safety of communities near their sites.",
    2: "Companies should not contribute to or profit from abuses committed by others, such as security "
       "forces, governments or business partners.",
    3: "Workers must be free to form and join unions and to bargain collectively without dismissal or "
       "intimidation.",
    4: "No one should be made to work under threat, through debt bondage, or with identity documents "
       "withheld, including in supply chains.",
    5: "Companies should not employ children below the legal working age or source from suppliers "
       "who do.",
    6: "Hiring, pay, promotion and treatment at work should not depend on gender, ethnicity, religion "
       "or similar traits.",
    7: "Companies should act to prevent environmental harm before it is certain, rather than waiting "
       "for damage to be proven.",
    8: "Companies should comply with environmental rules, report their impacts honestly and repair "
       "the damage they cause.",
    9: "Companies should adopt and not obstruct cleaner technologies that reduce pollution and "
       "emissions.",
    10: "Companies should not offer or accept bribes, rig bids, launder money or engage in other corrupt "
        "practices.",
}


def pattern(action: str, entity_b: str, look_for: list[str], ignore: list[str]) -> dict:
    return {"entityA": "Company", "action": action, "entityB": entity_b, "lookFor": look_for, "ignore": ignore}


PATTERNS = {
    1: [
        pattern("forcibly displaces", "local community",
                ["The company evicted villagers from their land without consultation."],
                ["The company paid for a new community school."]),
        pattern("infringes", "rights of indigenous communities",
                ["The mine expanded onto indigenous land without the consent of the tribes."],
                ["The firm signed a benefit-sharing agreement with indigenous groups."]),
        pattern("exposes to unsafe conditions", "local residents",
                ["Residents near the plant reported toxic fumes after a gas leak."],
                ["The plant passed its annual safety inspection."]),
    ],
    2: [
        pattern("supplies equipment to", "security forces committing abuses",
                ["The company sold surveillance tools to a regime that tracks dissidents."],
                ["The company sells cameras to retail stores."]),
        pattern("benefits from", "forced relocation by authorities",
                ["Police cleared the village so the company could build its dam."],
                ["The government built a road near the company site."]),
        pattern("contracts", "abusive security firm",
                ["Guards hired by the company beat protesters at the mine gate."],
                ["The company hired a security firm for its headquarters."]),
    ],
    3: [
        pattern("dismisses", "union organizers",
                ["The factory fired workers who tried to form a union."],
                ["The factory laid off staff after an order was cancelled."]),
        pattern("refuses to bargain with", "trade union",
                ["Management refused to meet the union over wages."],
                ["Management and the union agreed a new contract."]),
        pattern("intimidates", "striking workers",
                ["Supervisors threatened strikers with dismissal."],
                ["Workers went on strike over pay."]),
    ],
    4: [
        pattern("confiscates", "workers' passports",
                ["Migrant workers said the company kept their passports."],
                ["The company helped workers renew their visas."]),
        pattern("uses", "debt-bonded labour",
                ["Workers had to repay recruitment fees before they could leave."],
                ["The company offers salary advances on request."]),
        pattern("sources from", "forced-labour suppliers",
                ["The brand's cotton was traced to a region using prison labour."],
                ["The brand audits its cotton suppliers every year."]),
    ],
    5: [
        pattern("employs", "children",
                ["Inspectors found 14-year-olds working night shifts at the mill."],
                ["The company runs a summer internship for university students."]),
        pattern("sources from", "suppliers using child labour",
                ["Children were found picking cocoa for the company's supplier."],
                ["The supplier was certified free of child labour."]),
        pattern("fails to verify", "worker ages",
                ["The contractor hired teenagers without checking identity papers."],
                ["Age checks are performed at every hiring centre."]),
    ],
    6: [
        pattern("pays less to", "women",
                ["Female staff earned a fifth less than men in the same roles."],
                ["The company published its gender pay gap report."]),
        pattern("refuses to hire", "ethnic minorities",
                ["Recruiters were told to reject applicants with foreign names."],
                ["The company opened a recruitment office abroad."]),
        pattern("harasses", "employees",
                ["Dozens of employees described a culture of harassment by managers."],
                ["The company launched a staff wellbeing survey."]),
    ],
    7: [
        pattern("discharges pollutants into", "river",
                ["The plant released untreated wastewater into the river."],
                ["The plant upgraded its water treatment system."]),
        pattern("ignores", "environmental risk warnings",
                ["Engineers warned of a dam failure months before the spill."],
                ["The company commissioned an environmental impact study."]),
        pattern("clears", "protected forest",
                ["Satellite images show the company clearing a protected rainforest."],
                ["The company planted trees on a former quarry."]),
    ],
    8: [
        pattern("misreports", "emissions data",
                ["Regulators found the company understated its emissions."],
                ["The company restated a typo in its annual report."]),
        pattern("violates", "environmental permits",
                ["The plant exceeded the discharge limits in its permit."],
                ["The plant applied to renew its permit."]),
        pattern("fails to clean up", "contaminated site",
                ["The company left the contaminated site untreated for years."],
                ["The company completed remediation of the old depot."]),
    ],
    9: [
        pattern("lobbies against", "clean technology standards",
                ["The company lobbied to delay rules on cleaner engines."],
                ["The company joined an industry forum on standards."]),
        pattern("abandons", "emissions-reduction technology",
                ["The company shelved its carbon capture project to cut costs."],
                ["The company postponed a product launch."]),
        pattern("continues to operate", "obsolete polluting equipment",
                ["The company kept running coal boilers it had promised to retire."],
                ["The company replaced its delivery vans."]),
    ],
    10: [
        pattern("bribes", "public officials",
                ["Executives paid officials to win a mining licence."],
                ["The company paid its licence fees on time."]),
        pattern("engages in", "bid rigging",
                ["The firms agreed in advance who would win the tender."],
                ["The company won the tender in an open auction."]),
        pattern("launders", "illicit funds",
                ["Prosecutors say the company moved bribe money through shell firms."],
                ["The company moved its treasury to a new bank."]),
    ],
}


def article(aid, date, title, body, *, lang="en", sentiment="Negative", source="Demo Wire"):
    rec = {
        "articleId": aid,
        "url": f"https://news.example.org/{aid}",
        "title": title,
        "body": body,
        "language": lang,
        "publishedDate": date,
        "sourceName": source,
    }
    if sentiment:
        rec["sentimentHint"] = sentiment
    return rec


A01 = ("Acme Corp. was found to have discharged untreated wastewater into the Han River for three months. "
       "Residents downstream reported dead fish along the banks. "
       "Inspectors said the plant exceeded the discharge limits in its permit by a wide margin. "
       "Acme Corp said it was reviewing its procedures.")
A02 = ("Acme Corp dismissed eleven workers at its Daegu factory days after they tried to register a union. "
       "The workers say they were told organizing would cost them their jobs. "
       "The company said the dismissals were part of a restructuring.")
A03 = ("Acme Corp is again under scrutiny after a second leak of wastewater into the Han River. "
       "Local officials said the new discharge came from the same outlet. "
       "Acme Corp has not yet removed the sludge ponds that contaminated the riverbank last year. "
       "The company declined to comment.")
A04 = ("Borealis Mining Ltd expanded its open pit onto ancestral land of the Dene communities without "
       "their consent. "
       "Community leaders said bulldozers arrived without notice. "
       "Satellite images also show Borealis Mining clearing a section of the protected boreal forest "
       "next to the site.")
A05 = ("Prosecutors allege that Borealis Mining paid provincial officials to secure an extension of its "
       "mining licence. "
       "Two former managers have agreed to cooperate with the investigation. "
       "Borealis Mining Ltd. denies wrongdoing.")
A06 = ("An audit of Cobalt Textiles Inc. found children as young as thirteen sewing garments at a "
       "subcontracted workshop. "
       "Migrant workers at the main plant said the company kept their passports on arrival. "
       "Cobalt Textiles said it had ended the subcontract.")
A07 = ("Female machinists at Cobalt Textiles earn about a fifth less than male colleagues doing the same work, "
       "according to payroll records seen by reporters. "
       "The company said pay differences reflect seniority.")
A08 = ("Delta Chemicals GmbH ignored repeated warnings from its own engineers about corroded storage tanks "
       "before last week's spill. "
       "Chief executive Hans Vogel said the company would cooperate with the environment ministry. "
       "The ministry is also examining whether emissions figures filed by the plant were accurate.")
A09 = ("Die Firma Acme Corp hat nach Angaben der Behörden verschmutztes Wasser in den Fluss geleitet. "
       "Die Untersuchung ist noch nicht abgeschlossen und die Firma hat sich nicht geäußert.")
A10 = ("The Rovers lost the derby three to nil on Saturday after a disastrous first half. "
       "The manager said the team would regroup before the cup tie.")
A11 = ("Acme Corp won a regional award for its new recycling line, which the jury praised as a model "
       "for the industry. The company plans to open a second line next year.")
A12 = ("Parliament debated a proposal to tighten reporting rules on supply-chain labour abuses. "
       "Critics argue that voluntary codes have failed to stop forced labour in global supply chains. "
       "No vote is expected before the autumn.")

CORPUS = [
    article("a01", "2024-01-10", "Acme plant polluted Han River for months", A01),
    article("a02", "2024-02-15", "Acme fires workers who tried to unionise", A02),
    article("a03", "2024-03-20", "New Han River leak traced to Acme outlet", A03),
    article("a04", "2024-01-22", "Borealis pit expands onto Dene land", A04),
    article("a05", "2024-04-02", "Borealis accused of bribing officials", A05),
    article("a06", "2024-02-01", "Child labour found in Cobalt Textiles supply chain", A06),
    article("a07", "2024-03-05", "Cobalt Textiles pay gap exposed", A07),
    article("a08", "2024-03-12", "Delta Chemicals ignored tank warnings before spill", A08),
    article("a09", "2024-02-20", "Acme Corp leitet Abwasser in den Fluss", A09, lang="de"),
    article("a10", "2024-02-25", "Rovers crushed in derby", A10, sentiment=None, source="Demo Sport"),
    article("a11", "2024-03-01", "Acme wins recycling award", A11, sentiment="Positive"),
    article("a12", "2024-03-15", "Parliament weighs supply-chain reporting rules", A12),
]
MALFORMED = {"articleId": "a13", "url": "https://news.example.org/a13", "title": "Empty", "body": "",
             "language": "en", "publishedDate": "2024-03-16", "sourceName": "Demo Wire"}


def ents(*items):
    return j({"entities": [{"text": t, "type": k} for t, k in items]})


def triple(subject, action, obj, evidence):
    return j({"subject": subject, "action": action, "object": obj, "evidence": evidence})


ENTITIES = {
    "a01": ents(("Acme Corp.", "Organization"), ("Han River", "Location")),
    # "Globex" does not occur in the text and is dropped as ungrounded
    "a02": ents(("Acme Corp", "Organization"), ("Daegu", "Location"), ("Globex", "Organization")),
    "a03": ents(("Acme Corp", "Organization"), ("Han River", "Location")),
    "a04": ents(("Borealis Mining Ltd", "Organization"), ("Dene", "Organization"),
                ("Borealis Mining", "Organization")),
    "a05": ents(("Borealis Mining", "Organization"), ("Borealis Mining Ltd.", "Organization")),
    "a06": ents(("Cobalt Textiles Inc.", "Organization"), ("Cobalt Textiles", "Organization")),
    "a07": ents(("Cobalt Textiles", "Organization")),
    "a08": ents(("Delta Chemicals GmbH", "Organization"), ("Hans Vogel", "Person")),
}

MATCHES = {
    "a01": ["p7.1", "p8.2"],
    "a02": ["p3.1"],
    "a03": ["p7.1", "p8.3"],
    "a04": ["p1.2", "p7.3"],
    "a05": ["p10.1"],
    "a06": ["p4.1", "p5.1"],
    "a07": ["p6.1"],
    "a08": ["p7.2", "p8.1", "p8.2", "p10.1"],
}

TRIPLES = {
    "a01:p7.1": triple("Acme Corp.", "discharged untreated wastewater into", "Han River",
                       "Acme Corp. was found to have discharged untreated wastewater into the Han River for "
                       "three months."),
    "a01:p8.2": triple("Acme Corp", "exceeded permit discharge limits of", "environmental permit",
                       "Inspectors said the plant exceeded the discharge limits in its permit by a wide margin."),
    # first answer lacks evidence; the repair prompt gets a complete triple
    "a02:p3.1": [
        j({"subject": "Acme Corp", "action": "dismissed", "object": "union organizers"}),
        triple("Acme Corp", "dismissed", "workers organizing a union",
               "Acme Corp dismissed eleven workers at its Daegu factory days after they tried to register "
               "a union."),
    ],
    "a03:p7.1": triple("Acme Corp", "leaked wastewater into", "Han River",
                       "Acme Corp is again under scrutiny after a second leak of wastewater into the Han River."),
    "a03:p8.3": triple("Acme Corp", "has not removed", "contaminated sludge ponds",
                       "Acme Corp has not yet removed the sludge ponds that contaminated the riverbank last year."),
    "a04:p1.2": triple("Borealis Mining Ltd", "expanded onto", "ancestral land of the Dene communities",
                       "Borealis Mining Ltd expanded its open pit onto ancestral land of the Dene communities "
                       "without their consent."),
    "a04:p7.3": triple("Borealis Mining", "cleared", "protected boreal forest",
                       "Satellite images also show Borealis Mining clearing a section of the protected boreal "
                       "forest next to the site."),
    "a05:p10.1": triple("Borealis Mining", "paid", "provincial officials",
                        "Prosecutors allege that Borealis Mining paid provincial officials to secure an extension "
                        "of its mining licence."),
    "a06:p4.1": triple("Cobalt Textiles Inc.", "kept", "passports of migrant workers",
                       "Migrant workers at the main plant said the company kept their passports on arrival."),
    "a06:p5.1": triple("Cobalt Textiles Inc.", "employed", "children as young as thirteen",
                       "An audit of Cobalt Textiles Inc. found children as young as thirteen sewing garments at "
                       "a subcontracted workshop."),
    "a07:p6.1": triple("Cobalt Textiles", "pays less to", "female machinists",
                       "Female machinists at Cobalt Textiles earn about a fifth less than male colleagues doing "
                       "the same work, according to payroll records seen by reporters."),
    "a08:p7.2": triple("Delta Chemicals GmbH", "ignored", "warnings about corroded storage tanks",
                       "Delta Chemicals GmbH ignored repeated warnings from its own engineers about corroded "
                       "storage tanks before last week's spill."),
    # adversarial: subject that appears nowhere in the article
    "a08:p8.1": triple("AcmeCo", "misreported", "emissions figures",
                       "The ministry is also examining whether emissions figures filed by the plant were accurate."),
    # adversarial: a person as subject
    "a08:p8.2": triple("Hans Vogel", "violated", "environmental permit",
                       "Chief executive Hans Vogel said the company would cooperate with the environment ministry."),
    # adversarial: evidence that is not in the article
    "a08:p10.1": triple("Delta Chemicals GmbH", "bribed", "ministry inspectors",
                        "Delta Chemicals GmbH paid ministry inspectors to overlook the corroded tanks."),
}

STAGE1 = {aid: j({"keep": True, "reason": "Reports possible corporate misconduct."})
          for aid in ["a01", "a02", "a03", "a04", "a05", "a06", "a07", "a08"]}
STAGE1["a10"] = j({"keep": False, "reason": "Sports report with no ESG angle."})
STAGE1["a12"] = j({"keep": True, "reason": "Concerns forced labour in supply chains."})

COMPANIES = {"a01": "Acme Corp", "a02": "Acme Corp", "a03": "Acme Corp", "a04": "Borealis Mining Ltd",
             "a05": "Borealis Mining", "a06": "Cobalt Textiles Inc.", "a07": "Cobalt Textiles",
             "a08": "Delta Chemicals GmbH"}
STAGE2 = {aid: j({"keep": True, "company": c, "reason": "Names the company involved in a negative event."})
          for aid, c in COMPANIES.items()}
STAGE2["a12"] = j({"keep": False, "company": None, "reason": "Policy debate without a named company."})

ONE_SHOT = {
    "a01": [7], "a02": [3, 6], "a03": [7, 8], "a04": [1, 2, 7],
    "a05": [10], "a06": [5], "a07": [3, 6], "a08": [7, 8, 10],
}

GOLD = {
    "a01": {7, 8}, "a02": {3}, "a03": {7}, "a04": {1, 7},
    "a05": {10}, "a06": {4, 5}, "a07": {6}, "a08": {7, 8},
}


def answers() -> dict:
    patterns = {str(pid): j({"patterns": ps}) for pid, ps in PATTERNS.items()}
    # principle 6 first comes back one pattern short and is repaired on retry
    patterns["6"] = [j({"patterns": PATTERNS[6][:2]}), patterns["6"]]
    return {
        "comment": {str(k): v for k, v in COMMENTS.items()},
        "patterns": patterns,
        "stage1": STAGE1,
        "stage2": STAGE2,
        "entities": ENTITIES,
        "match": {aid: j({"matches": m}) for aid, m in MATCHES.items()},
        "triple": TRIPLES,
        "oneshot": {aid: j({"principles": p}) for aid, p in ONE_SHOT.items()},
    }


CONFIG = """\
# Demo pipeline: every model call is answered from fixtures recorded with the
# scripted provider, so the run is deterministic and needs no credentials.
run:
  offline: true
  parallelism: 4
  retries: 2
  comment_max_chars: 600
  require_negative: true
  pairing: adjacent
  timestamp: "2024-06-01T00:00:00Z"
gateway:
  fixture_dir: fixtures
  scripted_answers: answers.yaml
paths:
  corpus: corpus.jsonl
  review: review.txt
  labels: labels.tsv
models:
  default:
    provider: scripted
    model: demo-script-v1
    temperature: 0.0
  baseline:
    provider: scripted
    model: demo-oneshot-v1
    temperature: 0.0
"""


def main() -> None:
    DEMO.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(r, ensure_ascii=False, sort_keys=True) for r in CORPUS]
    lines.insert(6, json.dumps(MALFORMED, ensure_ascii=False, sort_keys=True))
    (DEMO / "corpus.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (DEMO / "answers.yaml").write_text(
        yaml.safe_dump(answers(), allow_unicode=True, sort_keys=True, width=100), encoding="utf-8")
    rows = ["articleId\tprincipleId\tgold"]
    for aid in sorted(GOLD):
        rows.extend(f"{aid}\t{pid}\t{int(pid in GOLD[aid])}" for pid in range(1, 11))
    (DEMO / "labels.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    (DEMO / "review.txt").write_text(
        "# Review decisions for the demo drafts: every pattern approved as generated.\n* approve\n",
        encoding="utf-8")
    (DEMO / "config.yaml").write_text(CONFIG, encoding="utf-8")


if __name__ == "__main__":
    main()
