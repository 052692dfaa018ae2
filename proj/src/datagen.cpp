#include "rcdiag/datagen.hpp"

#include <array>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "rcdiag/errors.hpp"
#include "rcdiag/hash.hpp"
#include "rcdiag/rng.hpp"

namespace rcdiag {

namespace {

const std::vector<std::string> kActors = {"Mary", "John", "Sandra", "Daniel"};
const std::vector<std::string> kLocations = {"bathroom", "hallway", "kitchen",
                                             "garden",   "office",  "bedroom"};
const std::vector<std::string> kMoveVerbs = {"moved to the", "went to the", "journeyed to the",
                                             "travelled to the"};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
    return items[rng.next_below(items.size())];
}

// Emits numbered lines; questions carry answer and supporting line id.
class StoryWriter {
public:
    explicit StoryWriter(std::ostringstream& out) : out_(out) {}

    void begin_story() { next_line_ = 1; }

    int fact(const std::string& text) {
        out_ << next_line_ << " " << text << "\n";
        return next_line_++;
    }

    void question(const std::string& text, const std::string& answer, int support) {
        out_ << next_line_++ << " " << text << "\t" << answer << "\t" << support << "\n";
        ++questions_;
    }

    int questions() const { return questions_; }

private:
    std::ostringstream& out_;
    int next_line_ = 1;
    int questions_ = 0;
};

// ---------------------------------------------------------------------------
// Task 1: single supporting fact. Actors move between locations; each round
// of two movements is followed by one "Where is X?" question.

void task1_story(StoryWriter& w, Rng& rng, int max_questions) {
    w.begin_story();
    std::map<std::string, std::pair<std::string, int>> location;  // actor -> (loc, line)
    for (int round = 0; round < 5 && w.questions() < max_questions; ++round) {
        for (int f = 0; f < 2; ++f) {
            const std::string& actor = pick(rng, kActors);
            std::string loc = pick(rng, kLocations);
            while (location.count(actor) && location[actor].first == loc)
                loc = pick(rng, kLocations);
            const int line = w.fact(actor + " " + pick(rng, kMoveVerbs) + " " + loc + ".");
            location[actor] = {loc, line};
        }
        std::vector<std::string> known;
        for (const auto& [actor, state] : location) known.push_back(actor);
        const std::string& actor = known[rng.next_below(known.size())];
        w.question("Where is " + actor + "?", location[actor].first, location[actor].second);
    }
}

// ---------------------------------------------------------------------------
// Task 2: two supporting facts. Objects are picked up, carried and dropped;
// each question asks where the most recently handled object is, right after
// the facts that determine it.

struct Task2State {
    std::map<std::string, std::string> actor_loc;
    std::map<std::string, std::string> holder;    // object -> actor
    std::map<std::string, std::string> obj_loc;   // object -> location (when dropped)
};

void task2_story(StoryWriter& w, Rng& rng, int max_questions) {
    w.begin_story();
    Task2State st;
    const std::vector<std::string> objects = {"football", "apple", "milk"};
    const std::vector<std::string> get_verbs = {"got the", "took the", "picked up the"};
    const std::vector<std::string> drop_verbs = {"dropped the", "discarded the",
                                                 "put down the"};

    auto move = [&](const std::string& actor) {
        std::string loc = pick(rng, kLocations);
        while (st.actor_loc.count(actor) && st.actor_loc[actor] == loc)
            loc = pick(rng, kLocations);
        st.actor_loc[actor] = loc;
        w.fact(actor + " " + pick(rng, kMoveVerbs) + " " + loc + ".");
    };

    for (int round = 0; round < 5 && w.questions() < max_questions; ++round) {
        const std::string& object = pick(rng, objects);
        // Whoever holds the object drops it first so another actor can act.
        if (st.holder.count(object)) {
            const std::string prev = st.holder[object];
            st.obj_loc[object] = st.actor_loc[prev];
            st.holder.erase(object);
            w.fact(prev + " " + pick(rng, drop_verbs) + " " + object + ".");
        }
        const std::string& actor = pick(rng, kActors);
        if (!st.actor_loc.count(actor)) move(actor);
        w.fact(actor + " " + pick(rng, get_verbs) + " " + object + ".");
        st.holder[object] = actor;
        st.obj_loc.erase(object);

        // Carry it somewhere (usually), sometimes drop it there.
        if (rng.next_below(4) != 0) move(actor);
        std::string answer = st.actor_loc[actor];
        if (rng.next_below(3) == 0) {
            w.fact(actor + " " + pick(rng, drop_verbs) + " " + object + ".");
            st.obj_loc[object] = answer;
            st.holder.erase(object);
        }
        w.question("Where is the " + object + "?", answer, 1);
    }
}

// ---------------------------------------------------------------------------
// Task 18: size reasoning over a fixed global ordering. The question
// direction is a deterministic function of the pair and template with a
// small flip probability, which is what makes question-only models strong
// on the original task.

void task18_story(StoryWriter& w, Rng& rng, int max_questions) {
    w.begin_story();
    const std::vector<std::string> objects = {"chocolate", "football", "suitcase", "chest",
                                              "wardrobe"};  // ascending size
    const int facts = 4 + static_cast<int>(rng.next_below(3));
    for (int f = 0; f < facts; ++f) {
        std::size_t i = rng.next_below(objects.size() - 1);
        std::size_t j = i + 1 + rng.next_below(objects.size() - 1 - i);
        if (rng.next_below(2) == 0)
            w.fact("The " + objects[j] + " is bigger than the " + objects[i] + ".");
        else
            w.fact("The " + objects[i] + " fits inside the " + objects[j] + ".");
    }
    const int questions = 2 + static_cast<int>(rng.next_below(2));
    for (int q = 0; q < questions && w.questions() < max_questions; ++q) {
        std::size_t i = rng.next_below(objects.size() - 1);
        std::size_t j = i + 1 + rng.next_below(objects.size() - 1 - i);
        const bool bigger_template = rng.next_below(2) == 0;
        // Default subject per (pair, template), flipped for 10% of questions.
        const std::uint64_t h =
            fnv1a64(objects[i] + "|" + objects[j] + "|" + (bigger_template ? "b" : "f"));
        bool subject_is_larger = (h & 1) != 0;
        if (rng.next_below(10) == 0) subject_is_larger = !subject_is_larger;
        const std::string& subject = subject_is_larger ? objects[j] : objects[i];
        const std::string& other = subject_is_larger ? objects[i] : objects[j];
        if (bigger_template)
            w.question("Is the " + subject + " bigger than the " + other + "?",
                       subject_is_larger ? "yes" : "no", 1);
        else
            w.question("Does the " + subject + " fit in the " + other + "?",
                       subject_is_larger ? "no" : "yes", 1);
    }
}

// ---------------------------------------------------------------------------
// Task 20: agent motivation. State fact, then movement, then object pickup,
// each immediately followed by the question it supports.

void task20_story(StoryWriter& w, Rng& rng, int max_questions) {
    w.begin_story();
    struct Motive {
        const char* state;
        const char* place;
        const char* object;  // nullptr when the state has no pickup
    };
    static const std::array<Motive, 4> motives = {{{"hungry", "kitchen", "apple"},
                                                   {"thirsty", "kitchen", "milk"},
                                                   {"tired", "bedroom", nullptr},
                                                   {"bored", "garden", "football"}}};
    const std::vector<std::string> actors = {"Yann", "Jason", "Antoine", "Sumit"};
    const std::vector<std::string> go_verbs = {"went to the", "went back to the"};

    const int episodes = 2;
    for (int e = 0; e < episodes && w.questions() < max_questions; ++e) {
        const std::string& actor = pick(rng, actors);
        const Motive& motive = motives[rng.next_below(motives.size())];
        const int state_line = w.fact(actor + " is " + motive.state + ".");
        w.question("Where will " + actor + " go?", motive.place, state_line);
        if (w.questions() >= max_questions) return;
        const int go_line =
            w.fact(actor + " " + pick(rng, go_verbs) + " " + std::string(motive.place) + ".");
        w.question("Why did " + actor + " go to the " + motive.place + "?", motive.state,
                   state_line);
        if (motive.object == nullptr || w.questions() >= max_questions) continue;
        w.fact(actor + " got the " + std::string(motive.object) + " there.");
        w.question("Why did " + actor + " get the " + motive.object + "?", motive.state,
                   go_line);
    }
}

}  // namespace

std::string generate_babi_task(int task, int questions, std::uint64_t seed) {
    if (questions < 1) throw Error("generate_babi_task: questions must be >= 1");
    std::ostringstream out;
    StoryWriter writer(out);
    Rng rng(seed);
    while (writer.questions() < questions) {
        switch (task) {
            case 1: task1_story(writer, rng, questions); break;
            case 2: task2_story(writer, rng, questions); break;
            case 18: task18_story(writer, rng, questions); break;
            case 20: task20_story(writer, rng, questions); break;
            default:
                throw Error("generate_babi_task: unsupported task " + std::to_string(task) +
                            " (supported: 1, 2, 18, 20)");
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// CBT-style fixture

namespace {

const std::vector<std::string> kNouns = {
    "fox",    "rabbit", "bear",   "wolf",   "owl",    "mouse",  "duck",   "horse",
    "crow",   "frog",   "basket", "river",  "forest", "meadow", "castle", "garden",
    "bridge", "cottage", "lantern", "wagon", "apple",  "loaf",   "cloak",  "boot",
    "kettle", "ribbon", "stone",  "ladder", "mill",   "barn",   "pond",   "hill",
    "king",   "queen",  "miller", "farmer", "child",  "sister", "brother", "piper"};
const std::vector<std::string> kVerbs = {"watched", "followed", "carried", "found",
                                         "chased",  "greeted",  "crossed", "visited",
                                         "fetched", "dropped",  "painted", "borrowed"};
const std::vector<std::string> kAdjectives = {"old",   "little", "golden", "quiet",
                                              "merry", "tired",  "clever", "gentle"};

struct FixtureSentence {
    std::vector<std::string> tokens;
    std::vector<std::size_t> noun_positions;
};

FixtureSentence make_sentence(Rng& rng) {
    FixtureSentence s;
    auto noun = [&]() {
        s.noun_positions.push_back(s.tokens.size());
        s.tokens.push_back(pick(rng, kNouns));
    };
    switch (rng.next_below(3)) {
        case 0:
            s.tokens = {"the", pick(rng, kAdjectives)};
            noun();
            s.tokens.push_back(pick(rng, kVerbs));
            s.tokens.push_back("the");
            noun();
            s.tokens.push_back(".");
            break;
        case 1:
            s.tokens = {"the"};
            noun();
            s.tokens.push_back(pick(rng, kVerbs));
            s.tokens.push_back("the");
            s.tokens.push_back(pick(rng, kAdjectives));
            noun();
            s.tokens.push_back("near");
            s.tokens.push_back("the");
            noun();
            s.tokens.push_back(".");
            break;
        default:
            s.tokens = {"one", "morning", "the"};
            noun();
            s.tokens.push_back(pick(rng, kVerbs));
            s.tokens.push_back("the");
            noun();
            s.tokens.push_back("by");
            s.tokens.push_back("the");
            noun();
            s.tokens.push_back(".");
            break;
    }
    return s;
}

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

}  // namespace

std::string generate_cbt_fixture(int examples, std::uint64_t seed) {
    if (examples < 1) throw Error("generate_cbt_fixture: examples must be >= 1");
    std::ostringstream out;
    Rng rng(seed);
    for (int e = 0; e < examples; ++e) {
        std::vector<FixtureSentence> passage;
        for (int s = 0; s < 20; ++s) passage.push_back(make_sentence(rng));

        // Cloze over a repeat of one passage sentence; the last one half of
        // the time, mirroring how answer-bearing context concentrates there.
        const std::size_t source =
            rng.next_below(2) == 0 ? 19 : rng.next_below(19);
        const FixtureSentence& src = passage[source];
        const std::size_t blank_pos =
            src.noun_positions[rng.next_below(src.noun_positions.size())];
        const std::string answer = src.tokens[blank_pos];

        std::vector<std::string> question = src.tokens;
        question[blank_pos] = "XXXXX";

        // Candidates: the answer plus nine other distinct nouns, biased
        // toward nouns that occur in the passage.
        std::vector<std::string> pool;
        for (const FixtureSentence& sent : passage)
            for (std::size_t p : sent.noun_positions) {
                const std::string& n = sent.tokens[p];
                if (n != answer && std::find(pool.begin(), pool.end(), n) == pool.end())
                    pool.push_back(n);
            }
        for (const std::string& n : kNouns)
            if (n != answer && std::find(pool.begin(), pool.end(), n) == pool.end())
                pool.push_back(n);
        std::vector<std::string> candidates = {answer};
        for (std::size_t i = 0; i < pool.size() && candidates.size() < 10; ++i)
            candidates.push_back(pool[i]);
        rng.shuffle(candidates);

        for (int s = 0; s < 20; ++s)
            out << (s + 1) << " " << join(passage[static_cast<std::size_t>(s)].tokens) << "\n";
        out << "21 " << join(question) << "\t" << answer << "\t";
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (i) out << "|";
            out << candidates[i];
        }
        out << "\n\n";
    }
    return out.str();
}

}  // namespace rcdiag
