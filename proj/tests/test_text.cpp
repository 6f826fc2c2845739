#include "crea/text.hpp"

#include "doctest.h"

using namespace crea;

TEST_CASE("tokenize splits on unicode whitespace") {
  CHECK(text::tokenize("a b  c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(text::tokenize("") == std::vector<std::string>{});
  CHECK(text::tokenize("  \t\n ") == std::vector<std::string>{});
  // NBSP and ideographic space count as separators.
  CHECK(text::tokenize("a b　c") ==
        std::vector<std::string>{"a", "b", "c"});
  CHECK(text::join_tokens({"x", "y"}) == "x y");
}

TEST_CASE("casefold covers ascii, greek and latin extensions") {
  CHECK(text::casefold("AbC") == "abc");
  CHECK(text::casefold("Ωραία") == "ωραία");
  CHECK(text::casefold("ΒΟΥΝΌ") == text::casefold("βουνό"));
  // Final sigma folds to sigma.
  CHECK(text::casefold("ς") == text::casefold("Σ"));
  // Romanian comma-below letters.
  CHECK(text::casefold("Școală Țară") == "școală țară");
  CHECK(text::casefold("Ärger") == "ärger");
}

TEST_CASE("sentence splitting") {
  auto sentences = text::split_sentences("First one. Second two! Third?");
  REQUIRE(sentences.size() == 3);
  CHECK(sentences[0] == "First one.");
  CHECK(sentences[1] == "Second two!");
  CHECK(sentences[2] == "Third?");

  // Newlines split unconditionally; danda ends Bangla sentences.
  auto lines = text::split_sentences("one\ntwo");
  REQUIRE(lines.size() == 2);
  auto bangla = text::split_sentences("আমি ভাত খাই। তুমি কি খাও?");
  CHECK(bangla.size() == 2);

  // A terminator not followed by whitespace does not split.
  auto tight = text::split_sentences("v1.2 is out. yes");
  REQUIRE(tight.size() == 2);
  CHECK(tight[0] == "v1.2 is out.");

  CHECK(text::split_sentences("").empty());
}
