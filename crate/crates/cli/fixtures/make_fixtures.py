"""Regenerates the bundled 50-article fixture corpus.

Run from this directory: python3 make_fixtures.py
Output is deterministic.
"""

import json
import random

EN = [
    "The river flows through the old town and meets the sea near the harbour.",
    "In the nineteenth century the railway connected the capital with the coast.",
    "The museum holds a large collection of paintings from local artists.",
    "Farmers in the valley grow apples, pears and grapes for wine.",
    "The mountain is covered with snow for most of the year.",
    "Scientists measured the temperature of the lake every morning.",
    "The city council approved a new plan for public transport.",
    "Many tourists visit the castle during the summer months.",
    "The library was founded by a group of teachers and students.",
    "The festival attracts musicians from all over Europe.",
    "A new bridge was opened across the river last spring.",
    "The forest is home to bears, wolves and many species of birds.",
    "The national team won the match after a difficult second half.",
    "The company announced that it would open a new factory next year.",
    "Heavy rain caused flooding in several villages in the south.",
    "The school offers courses in mathematics, physics and chemistry.",
    "The old church was restored with help from the local community.",
    "The government published a report on the state of the economy.",
    "Researchers discovered a new cave system under the plateau.",
    "The writer published her first novel at the age of twenty.",
    "The port handles millions of tonnes of cargo every year.",
    "Cyclists ride along the coast from the border to the city.",
    "The hospital opened a new department for children.",
    "Wine makers expect a good harvest after the warm summer.",
    "The orchestra performed a concert in the main square.",
]

SL = [
    "Reka teče skozi staro mestno jedro in se blizu pristanišča izliva v morje.",
    "V devetnajstem stoletju je železnica povezala prestolnico z obalo.",
    "Muzej hrani veliko zbirko slik domačih umetnikov.",
    "Kmetje v dolini pridelujejo jabolka, hruške in grozdje za vino.",
    "Gora je večji del leta pokrita s snegom.",
    "Znanstveniki so vsako jutro merili temperaturo jezera.",
    "Mestni svet je potrdil nov načrt za javni promet.",
    "Veliko turistov obišče grad v poletnih mesecih.",
    "Knjižnico je ustanovila skupina učiteljev in študentov.",
    "Festival privablja glasbenike iz vse Evrope.",
    "Lansko pomlad so čez reko odprli nov most.",
    "Gozd je dom medvedov, volkov in številnih vrst ptic.",
    "Državna reprezentanca je po težkem drugem polčasu zmagala.",
    "Podjetje je napovedalo, da bo prihodnje leto odprlo novo tovarno.",
    "Močno deževje je povzročilo poplave v več vaseh na jugu.",
    "Šola ponuja tečaje matematike, fizike in kemije.",
    "Staro cerkev so obnovili s pomočjo krajevne skupnosti.",
    "Vlada je objavila poročilo o stanju gospodarstva.",
    "Raziskovalci so pod planoto odkrili nov jamski sistem.",
    "Pisateljica je svoj prvi roman izdala pri dvajsetih letih.",
    "Pristanišče vsako leto pretovori več milijonov ton tovora.",
    "Kolesarji se vozijo ob obali od meje do mesta.",
    "Bolnišnica je odprla nov oddelek za otroke.",
    "Vinarji po toplem poletju pričakujejo dobro letino.",
    "Orkester je na glavnem trgu izvedel koncert.",
]

DE = [
    "Der Fluss fließt durch die Altstadt und mündet beim Hafen ins Meer.",
    "Im neunzehnten Jahrhundert verband die Eisenbahn die Hauptstadt mit der Küste.",
    "Das Museum besitzt eine große Sammlung von Gemälden heimischer Künstler.",
    "Die Bauern im Tal bauen Äpfel, Birnen und Trauben für den Wein an.",
    "Der Berg ist den größten Teil des Jahres mit Schnee bedeckt.",
    "Die Wissenschaftler maßen jeden Morgen die Temperatur des Sees.",
    "Der Stadtrat hat einen neuen Plan für den öffentlichen Verkehr beschlossen.",
    "Viele Touristen besuchen die Burg in den Sommermonaten.",
    "Die Bibliothek wurde von einer Gruppe von Lehrern und Studenten gegründet.",
    "Das Festival zieht Musiker aus ganz Europa an.",
    "Im letzten Frühling wurde eine neue Brücke über den Fluss eröffnet.",
    "Der Wald ist die Heimat von Bären, Wölfen und vielen Vogelarten.",
    "Die Nationalmannschaft gewann das Spiel nach einer schwierigen zweiten Hälfte.",
    "Das Unternehmen kündigte an, im nächsten Jahr eine neue Fabrik zu eröffnen.",
    "Starker Regen verursachte Überschwemmungen in mehreren Dörfern im Süden.",
    "Die Schule bietet Kurse in Mathematik, Physik und Chemie an.",
    "Die alte Kirche wurde mit Hilfe der örtlichen Gemeinde restauriert.",
    "Die Regierung veröffentlichte einen Bericht über die Lage der Wirtschaft.",
    "Forscher entdeckten unter der Hochebene ein neues Höhlensystem.",
    "Die Schriftstellerin veröffentlichte ihren ersten Roman mit zwanzig Jahren.",
    "Der Hafen schlägt jedes Jahr Millionen Tonnen Fracht um.",
    "Radfahrer fahren entlang der Küste von der Grenze bis zur Stadt.",
    "Das Krankenhaus eröffnete eine neue Abteilung für Kinder.",
    "Die Winzer erwarten nach dem warmen Sommer eine gute Ernte.",
    "Das Orchester gab ein Konzert auf dem Hauptplatz.",
]

N_ARTICLES = 50
MODELS = ("eurollm", "gams")
GERMAN = {"gams": set(range(0, 8)) | {45}, "eurollm": {40, 41, 45}}
TRUNCATED = {"gams": set(range(8, 13)), "eurollm": {42}}
PREFIXED = {"gams": {13, 14, 15}, "eurollm": {43}}


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def main():
    rng = random.Random(7)
    articles, translations = [], []
    for i in range(N_ARTICLES):
        idx = rng.sample(range(len(EN)), rng.randint(3, 6))
        source = " ".join(EN[k] for k in idx)
        aid = f"art{i:03d}"
        articles.append({
            "id": aid,
            "source_text": source,
            "source_char_count": len(source),
            "origin": "wiki" if i % 10 < 7 else "news",
        })
        for model in MODELS:
            pool = DE if i in GERMAN[model] else SL
            # each model drops or repeats a sentence now and then
            sents = [pool[k] for k in idx]
            if model == "gams" and rng.random() < 0.4:
                sents.append(sents[0])
            if model == "eurollm" and rng.random() < 0.3 and len(sents) > 3:
                sents.pop()
            if i in TRUNCATED[model]:
                sents = sents[:1]
            text = " ".join(sents)
            if i in PREFIXED[model]:
                text = "Slovenski prevod:\n" + text
            translations.append({
                "article_id": aid,
                "model_id": model,
                "text": text,
                "char_count": len(text),
            })

    lang = []
    for label, pool in (("sl", SL), ("de", DE), ("en", EN)):
        for k in range(60):
            a, b = rng.sample(range(len(pool)), 2)
            text = pool[a] if k % 3 == 0 else pool[a] + " " + pool[b]
            lang.append({"text": text, "label": label})

    write_jsonl("articles.jsonl", articles)
    write_jsonl("translations.jsonl", translations)
    write_jsonl("langid_corpus.jsonl", lang)


if __name__ == "__main__":
    main()
