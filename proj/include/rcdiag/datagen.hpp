#pragma once

#include <cstdint>
#include <string>

namespace rcdiag {

// Deterministic generators for desk-scale experiments. They emit the native
// text formats the parsers consume, with the same entities, templates and
// question placement dynamics as the original tasks, so corruption deltas
// show the same qualitative pattern without redistributing the corpora.
//
// Supported tasks: 1 (single supporting fact), 2 (two supporting facts),
// 18 (size reasoning), 20 (agent motivation). Each story carries several
// questions; generation stops once `questions` examples exist.
std::string generate_babi_task(int task, int questions, std::uint64_t seed);

// CBT-format fixture: 20-sentence passages, cloze on a repeated sentence
// (the last one half of the time), 10 candidates containing the answer.
std::string generate_cbt_fixture(int examples, std::uint64_t seed);

}  // namespace rcdiag
