// Copyright 2026 The cysec-dapt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cysec/numerics/rng.h"
#include "cysec/tokenizer/trainer.h"
#include "cysec/tokenizer/wordpiece.h"

namespace cysec::tokenizer {
namespace {

Vocab with_specials(std::vector<std::string> extra) {
  std::vector<std::string> pieces(kSpecialPieces.begin(), kSpecialPieces.end());
  pieces.insert(pieces.end(), extra.begin(), extra.end());
  return Vocab(std::move(pieces));
}

std::vector<std::string> pieces_of(const Encoding& e) { return e.pieces; }

TEST(Vocab, RejectsMissingSpecialAndDuplicates) {
  EXPECT_THROW(Vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]"}), ValidationError);
  EXPECT_THROW(with_specials({"a", "a"}), ValidationError);
  EXPECT_THROW(with_specials({"a", ""}), ValidationError);
}

TEST(Vocab, FileFormatIsOnePiecePerLine) {
  const Vocab v = with_specials({"un", "##aff"});
  EXPECT_EQ(v.serialize(), "[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\nun\n##aff\n");
  const Vocab back = Vocab::parse(v.serialize());
  EXPECT_EQ(back.pieces(), v.pieces());
  EXPECT_EQ(*back.find("##aff"), 6);
}

TEST(Vocab, SpecialIdsFollowFilePositions) {
  // bert-base-uncased places [UNK] at 100, [CLS] at 101 and so on.
  const Vocab v({"x", "[UNK]", "y", "[PAD]", "[CLS]", "[SEP]", "[MASK]"});
  EXPECT_EQ(v.unk_id(), 1);
  EXPECT_EQ(v.pad_id(), 3);
  EXPECT_TRUE(v.is_special(6));
  EXPECT_FALSE(v.is_special(0));
}

TEST(Encode, GreedyLongestMatch) {
  const Vocab v = with_specials({"un", "##aff", "##able", "##a"});
  const auto e = encode("unaffable", v, 16);
  EXPECT_EQ(pieces_of(e), (std::vector<std::string>{"[CLS]", "un", "##aff",
                                                    "##able", "[SEP]"}));
  EXPECT_EQ(e.attention_mask, (std::vector<std::uint8_t>{1, 1, 1, 1, 1}));
  ASSERT_EQ(e.word_spans.size(), 1u);
  EXPECT_EQ(e.word_spans[0].begin, 1u);
  EXPECT_EQ(e.word_spans[0].end, 4u);
}

TEST(Encode, EmptyTextGivesClsSep) {
  const Vocab v = with_specials({});
  const auto e = encode("", v, 8);
  EXPECT_EQ(pieces_of(e), (std::vector<std::string>{"[CLS]", "[SEP]"}));
  EXPECT_TRUE(e.word_spans.empty());
}

TEST(Encode, UnknownCharacterMakesWholeWordUnk) {
  const Vocab v = with_specials({"a", "##b"});
  const auto e = encode("abz ab", v, 8);
  EXPECT_EQ(pieces_of(e),
            (std::vector<std::string>{"[CLS]", "[UNK]", "a", "##b", "[SEP]"}));
}

TEST(Encode, OverlongWordIsUnk) {
  const Vocab v = with_specials({"a", "##a"});
  EXPECT_EQ(encode(std::string(100, 'a'), v, 200).size(), 102u);
  EXPECT_EQ(pieces_of(encode(std::string(101, 'a'), v, 200))[1], "[UNK]");
}

TEST(Encode, PunctuationSplitsAndDigitsStay) {
  EXPECT_EQ(basic_tokenize("CVE-2021, v2.3!"),
            (std::vector<std::string>{"cve", "-", "2021", ",", "v2", ".", "3", "!"}));
}

TEST(Encode, TruncationKeepsSep) {
  const Vocab v = with_specials({"a", "b", "c", "d"});
  const auto e = encode("a b c d", v, 4);
  EXPECT_EQ(pieces_of(e), (std::vector<std::string>{"[CLS]", "a", "b", "[SEP]"}));
  EXPECT_EQ(e.word_spans.size(), 2u);
  EXPECT_THROW(encode("a", v, 1), ContractError);
}

TEST(Encode, TruncationInsideWordKeepsPartialSpan) {
  const Vocab v = with_specials({"a", "##b", "##c"});
  const auto e = encode("abc", v, 4);
  EXPECT_EQ(pieces_of(e), (std::vector<std::string>{"[CLS]", "a", "##b", "[SEP]"}));
  ASSERT_EQ(e.word_spans.size(), 1u);
  EXPECT_EQ(e.word_spans[0].end, 3u);
}

TEST(Encode, PaddingExtendsMask) {
  const Vocab v = with_specials({"a"});
  auto e = encode("a", v, 8);
  pad_to(e, 6, v);
  EXPECT_EQ(e.ids.size(), 6u);
  EXPECT_EQ(e.attention_mask, (std::vector<std::uint8_t>{1, 1, 1, 0, 0, 0}));
  EXPECT_EQ(e.ids.back(), v.pad_id());
}

TEST(Decode, InvertsEncode) {
  const Vocab v = with_specials({"un", "##aff", "##able"});
  const auto e = encode("unaffable", v, 16);
  EXPECT_EQ(decode(e.ids, v), "unaffable");
  const std::vector<int> only_specials{v.cls_id(), v.sep_id()};
  EXPECT_EQ(decode(only_specials, v), "");
  const std::vector<int> bad{999};
  EXPECT_THROW(decode(bad, v), ContractError);
}

TEST(EncodeWords, SpansCoverWholeInputWords) {
  const Vocab v = with_specials({"v", "##2", "2", ".", "3", "apache"});
  const std::vector<std::string> words{"Apache", "v2.3"};
  const auto e = encode_words(words, v, 32);
  ASSERT_EQ(e.word_spans.size(), 2u);
  EXPECT_EQ(e.word_spans[0].begin, 1u);
  EXPECT_EQ(e.word_spans[0].end, 2u);
  EXPECT_EQ(e.word_spans[1].begin, 2u);
  EXPECT_EQ(e.word_spans[1].end, 6u);  // v ##2 . 3
}

TEST(TrainVocab, RepeatedPairBecomesOnePiece) {
  const std::vector<std::string> docs(5, "aa aa aa");
  const Vocab v = train_vocab(docs, 10);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_TRUE(v.contains("aa"));
  EXPECT_LE(v.size(), 10u);
  const auto e = encode("aa", v, 8);
  EXPECT_EQ(pieces_of(e), (std::vector<std::string>{"[CLS]", "aa", "[SEP]"}));
}

TEST(TrainVocab, SingleCharacterCorpus) {
  const std::vector<std::string> docs{"b b b"};
  const Vocab v = train_vocab(docs, 8);
  EXPECT_TRUE(v.contains("b"));
  EXPECT_THROW(train_vocab(docs, 6), ValidationError);
}

TEST(TrainVocab, EmptyCorpusIsError) {
  const std::vector<std::string> docs{"", "   "};
  EXPECT_THROW(train_vocab(docs, 100), ValidationError);
}

TEST(TrainVocab, RareCharactersExcludedByMinFrequency) {
  const std::vector<std::string> docs{"abab abab abab", "zq"};
  const Vocab v = train_vocab(docs, 40, 2);
  EXPECT_FALSE(v.contains("z"));
  EXPECT_TRUE(v.contains("a"));
  EXPECT_EQ(pieces_of(encode("zq", v, 8))[1], "[UNK]");
}

TEST(TrainVocab, DeterministicForFixedInput) {
  const std::vector<std::string> docs{"the attacker exploited the server",
                                      "patch the vulnerable server now",
                                      "the exploit targets servers"};
  EXPECT_EQ(train_vocab(docs, 60).pieces(), train_vocab(docs, 60).pieces());
}

std::string random_text(Rng& rng) {
  static const char* kWords[] = {"Malware", "ransomware", "the", "CVE-2021-44228",
                                 "log4j", "exploit", "patched!", "Zero-day",
                                 "phishing", "attack", "v2.14.1", "SOC"};
  std::string text;
  const std::size_t n = rng.below(12);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) text += rng.below(3) ? " " : "  ";
    text += kWords[rng.below(std::size(kWords))];
  }
  return text;
}

// Greedy, closed-vocabulary, length and lowercasing laws on random text.
TEST(EncodeProperties, HoldOnRandomText) {
  Rng rng(17);
  std::vector<std::string> corpus;
  for (int i = 0; i < 40; ++i) corpus.push_back(random_text(rng));
  const Vocab v = train_vocab(corpus, 120);
  for (int trial = 0; trial < 300; ++trial) {
    const std::string text = random_text(rng);
    const std::size_t max_seq = 2 + rng.below(40);
    const auto e = encode(text, v, max_seq);
    EXPECT_LE(e.size(), max_seq);
    EXPECT_EQ(e.ids.front(), v.cls_id());
    EXPECT_EQ(e.ids.back(), v.sep_id());
    for (std::size_t i = 0; i < e.size(); ++i) {
      EXPECT_EQ(v.piece(e.ids[i]), e.pieces[i]);
    }
    const std::size_t total = count_pieces(text, v);
    if (total + 2 <= max_seq) EXPECT_EQ(e.size(), total + 2);
    EXPECT_EQ(encode(lowercase(text), v, max_seq).ids, e.ids);

    // Spans partition the content pieces.
    std::size_t cursor = 1;
    for (const auto& span : e.word_spans) {
      EXPECT_EQ(span.begin, cursor);
      cursor = span.end;
    }
    EXPECT_EQ(cursor, e.size() - 1);

    // Re-scan: every piece is the longest vocab prefix of what remains.
    for (const auto& word : basic_tokenize(text)) {
      const auto pieces = wordpiece(word, v);
      if (pieces.size() == 1 && pieces[0] == kUnk) continue;
      const auto chars = utf8_chars(word);
      std::size_t start = 0;
      for (const auto& p : pieces) {
        const std::string prefix = start ? "##" : "";
        std::size_t longest = 0;
        for (std::size_t end = start + 1; end <= chars.size(); ++end) {
          std::string cand = prefix;
          for (std::size_t k = start; k < end; ++k) cand += chars[k];
          if (v.contains(cand)) longest = end;
        }
        std::string expected = prefix;
        for (std::size_t k = start; k < longest; ++k) expected += chars[k];
        EXPECT_EQ(p, expected);
        start = longest;
      }
      EXPECT_EQ(start, chars.size());
    }
  }
}

TEST(DecodeProperties, RoundTripsInVocabWords) {
  const std::vector<std::string> corpus{"exploit exploit malware malware phishing"};
  const Vocab v = train_vocab(corpus, 80);
  for (const std::string w : {"exploit", "malware", "phishing", "ex", "mal"}) {
    EXPECT_EQ(decode(encode(w, v, 32).ids, v), w);
  }
}

}  // namespace
}  // namespace cysec::tokenizer
