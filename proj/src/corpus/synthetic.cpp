// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "corpus/corpus.hpp"

namespace asr::corpus {
namespace {

using Lexicon = std::map<std::string, std::vector<std::string>>;

const Lexicon& lexicon() {
    static const Lexicon lex = {
        {"subject", {"the author", "the narrator", "my teacher", "the scientist", "the main character",
                     "my group", "the class", "the farmer", "the mayor", "the student council", "the coach",
                     "the explorer", "my partner", "the writer", "the team"}},
        {"verb", {"explains", "describes", "shows", "argues", "suggests", "compares", "believes", "proves",
                  "remembers", "notices", "discovers", "questions", "supports", "predicts"}},
        {"topic", {"the water cycle", "photosynthesis", "the american revolution", "fractions", "the solar system",
                   "climate change", "the food chain", "the industrial revolution", "volcanoes", "recycling",
                   "the election", "the poem", "the ancient romans", "gravity", "the rain forest",
                   "electric circuits", "the civil rights movement", "plate tectonics", "the story", "the experiment"}},
        {"adj", {"important", "interesting", "confusing", "surprising", "helpful", "difficult", "clear",
                 "convincing", "strange", "useful", "complicated", "exciting"}},
        {"reason", {"the evidence is strong", "the data supports it", "the example in paragraph two",
                    "it happens every year", "the graph shows a pattern", "the text gives many details",
                    "it changes how people live", "the results were measured twice", "the quote proves it",
                    "the author uses facts"}},
        {"activity", {"soccer practice", "reading", "the science fair", "band rehearsal", "drawing",
                      "baking cookies", "the field trip", "basketball", "writing stories", "chess club",
                      "camping", "learning guitar", "the library", "swimming"}},
        {"person", {"my friend", "my sister", "my cousin", "my grandma", "my brother", "my neighbor",
                    "my best friend", "my uncle", "my mom", "my dad"}},
        {"time", {"last weekend", "yesterday", "every summer", "after school", "on saturday", "in the morning",
                  "during winter break", "last year", "on the bus"}},
        {"number", {"two", "three", "four", "five", "ten", "twelve", "twenty", "a hundred"}},
        {"thing", {"the plant", "the bridge", "the rocket", "the map", "the garden", "the robot", "the volcano model",
                   "the poster", "the essay", "the solution"}},
    };
    return lex;
}

// Neutral filler.
const std::vector<std::string>& filler_templates() {
    static const std::vector<std::string> t = {
        "{subject} {verb} that {topic} is {adj}.",
        "I think {topic} is {adj} because {reason}.",
        "In my opinion {subject} {verb} {topic} well.",
        "{person} and I went to {activity} {time}.",
        "The answer is {number} because {reason}.",
        "First we measured {thing} and then we wrote down {number} results.",
        "{subject} {verb} how {topic} works.",
        "My favorite part was {activity} with {person}.",
        "We learned that {topic} can be {adj}.",
        "One reason is that {reason}.",
        "{time} {person} helped me build {thing}.",
        "This is {adj} since {reason}.",
        "The text says {topic} affects {number} different groups.",
        "I agree with {subject} about {topic}.",
        "If I could change {thing} I would make it more {adj}.",
        "{subject} {verb} that {reason}.",
        "To conclude, {topic} is {adj} and {adj}.",
        "I enjoy {activity} {time}.",
    };
    return t;
}

// Texts that share vocabulary with alarming phrases but are benign.
const std::vector<std::string>& hard_negative_templates() {
    static const std::vector<std::string> t = {
        "In the story the hero wanted to kill the dragon.",
        "The soldiers in the civil war died from disease more than battle.",
        "Please help me understand how to solve {topic} problems.",
        "I hate when it rains during {activity}.",
        "This homework is killing me lol.",
        "{person} beats me at chess every time.",
        "The character felt sad when the dog died at the end.",
        "I would die for a slice of pizza right now.",
        "The author uses the word hurt to show the feelings of the character.",
        "The volcano could kill many people if it erupts.",
        "My life would be easier with a calculator.",
    };
    return t;
}

struct AlarmTemplate {
    RubricCategory category;
    std::string text;
};

const Lexicon& alarm_lexicon() {
    static const Lexicon lex = {
        {"want", {"want to", "wanna", "am going to", "really want to", "just want to"}},
        {"abuser", {"my dad", "my stepdad", "my mom", "my uncle", "my brother", "her boyfriend"}},
        {"victim", {"my girlfriend", "my little brother", "a kid in my class", "my teacher", "someone at school"}},
        {"weapon", {"a sniper rifle", "a gun", "a knife", "my dads gun"}},
    };
    return lex;
}

const std::vector<AlarmTemplate>& alarm_templates() {
    using C = RubricCategory;
    static const std::vector<AlarmTemplate> t = {
        {C::HarmToSelf, "I {want} kill myself."},
        {C::HarmToSelf, "I cut myself a lot when nobody is looking."},
        {C::HarmToSelf, "I cut a lot."},
        {C::HarmToSelf, "I have been thinking about ending my life."},
        {C::HarmToSelf, "I took a bunch of pills so I could disappear."},
        {C::HarmToSelf, "I stopped eating because I want to disappear."},
        {C::HarmToAnother, "I hit {victim} and I will do it again."},
        {C::HarmToAnother, "I {want} bring {weapon} to school and hurt everyone."},
        {C::HarmToAnother, "I want {weapon}."},
        {C::HarmToAnother, "They all must die."},
        {C::HarmToAnother, "I am going to make {victim} bleed."},
        {C::HarmFromAnother, "{abuser} beats me."},
        {C::HarmFromAnother, "I get bullied every day and they punch me."},
        {C::HarmFromAnother, "{abuser} touches me and says not to tell anyone."},
        {C::HarmFromAnother, "{abuser} hits me with a belt when he gets drunk."},
        {C::SevereDepressionTrauma, "Please kill me."},
        {C::SevereDepressionTrauma, "I want to die."},
        {C::SevereDepressionTrauma, "I wish I was dead."},
        {C::SevereDepressionTrauma, "Nobody would care if I was gone."},
        {C::SevereDepressionTrauma, "I feel empty and hopeless every single day."},
        {C::SeriousRequestForHelp, "I hate my life, please help."},
        {C::SeriousRequestForHelp, "Help me or kill me."},
        {C::SeriousRequestForHelp, "Someone please help me I am not safe at home."},
        {C::SeriousRequestForHelp, "I need help I cannot keep living like this."},
    };
    return t;
}

std::string expand(const std::string& tmpl, const Lexicon& lex, Rng& rng) {
    std::string out;
    out.reserve(tmpl.size() + 32);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            const std::size_t close = tmpl.find('}', i);
            const std::string key = tmpl.substr(i + 1, close - i - 1);
            auto it = lex.find(key);
            if (it == lex.end()) it = lexicon().find(key);
            out += rng.pick(it->second);
            i = close + 1;
        } else {
            out += tmpl[i++];
        }
    }
    // capitalize the sentence start
    if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
    return out;
}

std::string filler_sentence(Rng& rng) { return expand(rng.pick(filler_templates()), lexicon(), rng); }

std::vector<std::string> filler_body(Rng& rng) {
    // mostly short answers; a few long essays that span several segments
    const bool essay = rng.below(100) < 3;
    const std::size_t n = essay ? 20 + rng.below(30) : 2 + rng.below(5);
    std::vector<std::string> s;
    s.reserve(n + 1);
    for (std::size_t i = 0; i < n; ++i) s.push_back(filler_sentence(rng));
    return s;
}

std::string join(const std::vector<std::string>& sentences) {
    std::string out;
    for (const auto& s : sentences) {
        if (!out.empty()) out += ' ';
        out += s;
    }
    return out;
}

}  // namespace

std::vector<LabeledText> generate_synthetic(std::size_t n_normal, std::size_t n_asr, std::uint64_t seed) {
    if (n_normal == 0 && n_asr == 0) throw invalid_argument("generate_synthetic needs at least one record");
    Rng rng(seed);

    std::vector<int> labels(n_normal, 0);
    labels.resize(n_normal + n_asr, 1);
    rng.shuffle(labels);

    std::vector<LabeledText> out;
    out.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        LabeledText r;
        char id[64];
        std::snprintf(id, sizeof id, "syn-%llu-%07zu", static_cast<unsigned long long>(seed), i);
        r.id = id;
        r.label = labels[i];
        std::vector<std::string> body = filler_body(rng);
        if (r.label == 1) {
            const auto& alarm = rng.pick(alarm_templates());
            r.category = alarm.category;
            // roughly the supplementary share of alarming training texts
            r.source = rng.below(100) < 21 ? Source::Supplementary : Source::Student;
            const std::size_t at = rng.below(body.size() + 1);
            body.insert(body.begin() + static_cast<std::ptrdiff_t>(at), expand(alarm.text, alarm_lexicon(), rng));
        } else {
            r.source = rng.below(1000) < 4 ? Source::Supplementary : Source::Student;
            if (rng.below(100) < 4) {
                const std::size_t at = rng.below(body.size() + 1);
                body.insert(body.begin() + static_cast<std::ptrdiff_t>(at),
                            expand(rng.pick(hard_negative_templates()), lexicon(), rng));
            }
        }
        r.text = join(body);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace asr::corpus
