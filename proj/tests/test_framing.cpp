#include <doctest.h>

#include <map>
#include <random>
#include <set>
#include <string>

#include "coref/framing.hpp"
#include "figure_fixture.hpp"
#include "support.hpp"

using namespace coref;

namespace {

MaskedSentence plain_sentence(int n_tokens) {
  MaskedSentence ms;
  for (int i = 0; i < n_tokens; ++i) {
    if (i) ms.text += ' ';
    ms.text += 'w' + std::to_string(i);
  }
  return ms;
}

}  // namespace

TEST_CASE("build_frames: one short sentence makes one frame") {
  std::vector<MaskedSentence> masked = {plain_sentence(5)};
  auto frames = build_frames(masked, 1600, ts::words_fn());
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].first_sentence == 0);
  CHECK(frames[0].last_sentence == 0);
  CHECK(frames[0].masked_text == masked[0].text);
}

TEST_CASE("build_frames: greedy packing at the 1600 budget") {
  std::vector<MaskedSentence> masked = {plain_sentence(700), plain_sentence(700),
                                        plain_sentence(700)};
  auto frames = build_frames(masked, 1600, ts::words_fn());
  REQUIRE(frames.size() == 2);
  CHECK(frames[0].first_sentence == 0);
  CHECK(frames[0].last_sentence == 1);
  CHECK(frames[1].first_sentence == 2);
  CHECK(frames[1].last_sentence == 2);
  for (const auto& f : frames) CHECK(whitespace_token_count(f.masked_text) <= 1600);
}

TEST_CASE("build_frames: a sentence over the budget is an error naming it") {
  std::vector<MaskedSentence> masked = {plain_sentence(3), plain_sentence(40)};
  CHECK_THROWS_WITH_AS(build_frames(masked, 10, ts::words_fn()),
                       doctest::Contains("sentence 1"), Error);
}

TEST_CASE("build_frames: ranges are adjacent and cover the document") {
  std::mt19937 rng(5);
  for (int i = 0; i < 20; ++i) {
    ts::GenOptions g;
    g.min_sentences = 4;
    g.max_sentences = 10;
    Document doc = ts::random_document(g, rng, "cov" + std::to_string(i));
    std::vector<MaskedSentence> masked;
    std::vector<std::vector<Mention>> by_sentence(doc.sentences.size());
    for (const auto& m : extract_mentions(doc))
      by_sentence[static_cast<size_t>(m.pos.sentence)].push_back(m);
    for (size_t si = 0; si < doc.sentences.size(); ++si)
      masked.push_back(render_masked_sentence(doc.sentences[si], static_cast<int>(si),
                                              by_sentence[si]));
    auto frames = build_frames(masked, 25, ts::words_fn());
    REQUIRE(!frames.empty());
    CHECK(frames.front().first_sentence == 0);
    CHECK(frames.back().last_sentence == static_cast<int>(doc.sentences.size()) - 1);
    for (size_t k = 0; k + 1 < frames.size(); ++k)
      CHECK(frames[k + 1].first_sentence == frames[k].last_sentence + 1);
  }
}

TEST_CASE("build_tuples: a single frame makes one degenerate tuple without [MID]") {
  std::vector<MaskedSentence> masked = {plain_sentence(4)};
  auto frames = build_frames(masked, 100, ts::words_fn());
  auto tuples = build_tuples(frames, "inst", 1000, ts::words_fn());
  REQUIRE(tuples.size() == 1);
  CHECK(!tuples[0].after.has_value());
  CHECK(tuples[0].input_text == masked[0].text);
  CHECK(tuples[0].input_text.find("[MID]") == std::string::npos);
}

TEST_CASE("build_tuples: consecutive tuples share a frame") {
  std::vector<MaskedSentence> masked = {plain_sentence(4), plain_sentence(4), plain_sentence(4)};
  auto frames = build_frames(masked, 4, ts::words_fn());
  REQUIRE(frames.size() == 3);
  auto tuples = build_tuples(frames, "inst", 1000, ts::words_fn());
  REQUIRE(tuples.size() == 2);
  REQUIRE(tuples[0].after.has_value());
  CHECK(tuples[0].after->masked_text == tuples[1].before.masked_text);
  CHECK(tuples[0].after->frame_index == tuples[1].before.frame_index);
  CHECK(tuples[0].input_text == frames[0].masked_text + " [MID] " + frames[1].masked_text);
}

TEST_CASE("build_tuples: budget overflow names the frame pair") {
  std::vector<MaskedSentence> masked = {plain_sentence(8), plain_sentence(8)};
  auto frames = build_frames(masked, 8, ts::words_fn());
  CHECK_THROWS_WITH_AS(build_tuples(frames, "one two three", 10, ts::words_fn()),
                       doctest::Contains("(0,1)"), Error);
}

TEST_CASE("render_instruction: template contents") {
  InstructionSpec inst5{5, "English", true};
  std::string text5 = render_instruction(inst5);
  CHECK(text5.find("coreferential/coherent mention") != std::string::npos);
  CHECK(text5.find("For example: author and book represent different entities.") !=
        std::string::npos);
  CHECK(text5.find("Where you see </z>@ there is a zero mention") != std::string::npos);
  CHECK(text5.rfind(kZeroSuffixLine) == text5.size() - kZeroSuffixLine.size());

  std::string text1 = render_instruction({1, "English", false});
  CHECK(text1.rfind("The text is in English.\n", 0) == 0);
  CHECK(render_instruction({1, "Hungarian", false}).find("The text is in Hungarian.") == 0);

  std::string text4 = render_instruction({4, "English", false});
  CHECK(text4.find("coreferential") != std::string::npos);
  CHECK(text4.find("coherent") == std::string::npos);

  std::string text3 = render_instruction({3, "English", false});
  CHECK(text3.find("coreferential/coherent") != std::string::npos);
  CHECK(text3.find("author and book") == std::string::npos);

  std::string text2 = render_instruction({2, "English", false});
  CHECK(text2.find("<m>Bertrand Russell </m>#MASK") != std::string::npos);
  CHECK(text2.find("<m>The History of Western Philosophy </m>#1") != std::string::npos);

  CHECK_THROWS_WITH_AS(render_instruction({0, "x", false}), doctest::Contains("out of range"),
                       Error);
  CHECK_THROWS_WITH_AS(render_instruction({6, "x", false}), doctest::Contains("out of range"),
                       Error);
}

TEST_CASE("export: document without mentions has output equal to input") {
  Document doc = ts::document(
      "nomen", {ts::sentence("nm-s1", {ts::word(1, "calm"), ts::word(2, "sea")}),
                ts::sentence("nm-s2", {ts::word(1, "night"), ts::word(2, "wind")})});
  auto records = export_training_tuples(doc, {5, "English", true}, {1600, 7168}, ts::words_fn());
  REQUIRE(records.size() == 1);
  CHECK(records[0].output == records[0].input);
}

TEST_CASE("export: the sample tuple reproduces the figure bytes and numbers") {
  Document doc = ts::hungarian_figure_document();
  auto records = export_training_tuples(doc, {5, "Hungarian", true}, {40, 7168}, ts::words_fn());
  REQUIRE(records.size() == 1);
  CHECK(records[0].instruction == render_instruction({5, "Hungarian", true}));
  CHECK(records[0].input == ts::hungarian_figure_input());
  auto tuples = document_tuples(doc, records[0].instruction, {40, 7168}, ts::words_fn());
  REQUIRE(tuples.size() == 1);
  CHECK(records[0].output ==
        fill_masks(ts::hungarian_figure_input(), tuples[0].slots, ts::hungarian_figure_numbers()));
}

TEST_CASE("export: gold local numbers are dense and first-appearance ordered") {
  std::mt19937 rng(29);
  for (int i = 0; i < 25; ++i) {
    Document doc = ts::random_document(ts::GenOptions{}, rng, "gold" + std::to_string(i));
    std::map<MentionPos, std::string> entity_of;
    for (const auto& m : extract_mentions(doc)) entity_of[m.pos] = m.entity_id;
    auto tuples = document_tuples(doc, "inst", {20, 7168}, ts::words_fn());
    for (const auto& tuple : tuples) {
      auto numbers = gold_local_numbers(tuple, entity_of);
      long long next_new = 0;
      std::map<std::string, long long> seen;
      for (size_t k = 0; k < numbers.size(); ++k) {
        const std::string& eid = entity_of.at(tuple.slots[k].mention);
        if (!seen.count(eid)) {
          CHECK(numbers[k] == next_new);
          seen[eid] = next_new++;
        } else {
          CHECK(numbers[k] == seen[eid]);
        }
      }
    }
  }
}

TEST_CASE("tuple overlap chain and slot coverage") {
  std::mt19937 rng(31);
  for (int i = 0; i < 15; ++i) {
    ts::GenOptions g;
    g.min_sentences = 5;
    g.max_sentences = 9;
    Document doc = ts::random_document(g, rng, "chain" + std::to_string(i));
    auto tuples = document_tuples(doc, "inst", {18, 7168}, ts::words_fn());
    REQUIRE(!tuples.empty());

    for (size_t k = 0; k + 1 < tuples.size(); ++k) {
      REQUIRE(tuples[k].after.has_value());
      CHECK(tuples[k].after->masked_text == tuples[k + 1].before.masked_text);
      REQUIRE(tuples[k].after->slots.size() == tuples[k + 1].before.slots.size());
      for (size_t s = 0; s < tuples[k].after->slots.size(); ++s)
        CHECK(tuples[k].after->slots[s].mention == tuples[k + 1].before.slots[s].mention);
    }

    std::map<MentionPos, int> appearances;
    for (const auto& t : tuples)
      for (const auto& slot : t.slots) appearances[slot.mention]++;
    size_t n_mentions = extract_mentions(doc).size();
    CHECK(appearances.size() == n_mentions);

    if (tuples.size() == 1 && !tuples[0].after.has_value()) {
      for (const auto& [pos, count] : appearances) CHECK(count == 1);
    } else {
      int first_frame_end = tuples.front().before.last_sentence;
      int last_frame_start = tuples.back().after->first_sentence;
      for (const auto& [pos, count] : appearances) {
        // slots of shared frames appear in exactly two tuples, edge frames in one
        if (pos.sentence <= first_frame_end || pos.sentence >= last_frame_start)
          CHECK(count == 1);
        else
          CHECK(count == 2);
      }
    }
  }
}

TEST_CASE("budgets hold under both length functions") {
  std::mt19937 rng(37);
  auto bytes_fn = [](std::string_view t) { return byte_count(t); };
  for (int i = 0; i < 10; ++i) {
    ts::GenOptions g;
    g.min_sentences = 6;
    g.max_sentences = 12;
    Document doc = ts::random_document(g, rng, "bud" + std::to_string(i));
    std::string inst = render_instruction({5, "English", true});

    for (long frame_budget : {30L, 80L, 1600L}) {
      auto tuples = document_tuples(doc, inst, {frame_budget, 7168}, ts::words_fn());
      for (const auto& t : tuples) {
        CHECK(whitespace_token_count(t.before.masked_text) <= frame_budget);
        if (t.after) CHECK(whitespace_token_count(t.after->masked_text) <= frame_budget);
        CHECK(whitespace_token_count(t.composed_text()) <= 7168);
      }
    }
    auto tuples = document_tuples(doc, inst, {400, 2000}, bytes_fn);
    for (const auto& t : tuples) {
      CHECK(byte_count(t.before.masked_text) <= 400);
      CHECK(byte_count(t.composed_text()) <= 2000);
    }
  }
}
