#include <gtest/gtest.h>

#include "cbwatch/core.hpp"
#include "cbwatch/labeler.hpp"
#include "support.hpp"

using namespace cbwatch;

namespace {

json good_record() {
  return json{{"id", "c1"},           {"incident_id", "e1"},  {"text", "好样的"},
              {"timestamp", 1700000000}, {"platform", "weibo"}, {"genre", "society"}};
}

Errc code_of(const json& raw) {
  try {
    validate_comment(raw);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for " << raw.dump();
  return Errc::InvalidArgument;
}

}  // namespace

TEST(ValidateComment, WellFormedRecord) {
  const Comment c = validate_comment(good_record());
  EXPECT_EQ(c.id, "c1");
  EXPECT_EQ(c.incident_id, "e1");
  EXPECT_EQ(c.text, "好样的");
  EXPECT_EQ(c.timestamp, 1700000000);
  EXPECT_EQ(c.platform, Platform::weibo);
  EXPECT_EQ(c.genre, Genre::society);
}

TEST(ValidateComment, WhitespaceTextIsEmpty) {
  auto r = good_record();
  r["text"] = "   ";
  EXPECT_EQ(code_of(r), Errc::EmptyText);
  r["text"] = "\xE3\x80\x80\t";
  EXPECT_EQ(code_of(r), Errc::EmptyText);
}

TEST(ValidateComment, UnknownGenreNamesTheField) {
  auto r = good_record();
  r["genre"] = "finance";
  try {
    validate_comment(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownEnum);
    EXPECT_EQ(e.subject(), "genre");
  }
}

TEST(ValidateComment, MissingFieldsAreNamed) {
  for (const char* field : {"id", "incident_id", "text", "timestamp", "platform", "genre"}) {
    auto r = good_record();
    r.erase(field);
    try {
      validate_comment(r);
      FAIL() << field;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::MissingField) << field;
      EXPECT_EQ(e.subject(), field);
    }
  }
}

TEST(ValidateComment, CaseInsensitiveEnumsAndUnknownPlatform) {
  auto r = good_record();
  r["platform"] = "WeiBo";
  r["genre"] = "Politics";
  Comment c = validate_comment(r);
  EXPECT_EQ(c.platform, Platform::weibo);
  EXPECT_EQ(c.genre, Genre::politics);
  r["platform"] = "tieba";
  EXPECT_EQ(validate_comment(r).platform, Platform::other);
}

TEST(ValidateComment, Timestamps) {
  auto r = good_record();
  r["timestamp"] = "1700000000";
  EXPECT_EQ(validate_comment(r).timestamp, 1700000000);
  r["timestamp"] = "2023-11-14T22:13:20Z";
  EXPECT_EQ(validate_comment(r).timestamp, 1700000000);
  r["timestamp"] = "2023-11-15T06:13:20+08:00";
  EXPECT_EQ(validate_comment(r).timestamp, 1700000000);
  for (json bad : {json(0), json(-5), json("yesterday"), json("2023-13-01T00:00:00Z"), json(1.5)}) {
    r["timestamp"] = bad;
    EXPECT_EQ(code_of(r), Errc::BadTimestamp) << bad.dump();
  }
}

TEST(ValidateComment, Iso8601RoundTrip) {
  for (Timestamp t : {1LL, 951782400LL, 1700000000LL, 4102444799LL}) {
    EXPECT_EQ(parse_timestamp(json(format_iso8601(t))), t) << format_iso8601(t);
  }
  EXPECT_EQ(format_iso8601(1700000000), "2023-11-14T22:13:20Z");
}

TEST(ValidateComment, SerializeRoundTrip) {
  const Platform platforms[] = {Platform::douyin, Platform::weibo, Platform::xiaohongshu, Platform::bilibili,
                                Platform::other};
  for (Platform p : platforms) {
    for (Genre g : kAllGenres) {
      Comment c = tst::make_comment("id-" + std::string(to_string(p)), "文本 " + std::string(to_string(g)));
      c.platform = p;
      c.genre = g;
      EXPECT_EQ(validate_comment(json::parse(to_json(c).dump())), c);
    }
  }
}

TEST(Labels, IntegerForm) {
  EXPECT_EQ(to_int(Label::cyberbullying), 1);
  EXPECT_EQ(to_int(Label::non_cyberbullying), 0);
  EXPECT_EQ(label_from_int(1), Label::cyberbullying);
  EXPECT_THROW(label_from_int(2), Error);
}

TEST(Explanation, IndexRangePerMethod) {
  EXPECT_NO_THROW(validate(Explanation{Method::paraphraser, 0, "ok"}));
  EXPECT_THROW(validate(Explanation{Method::paraphraser, 1, "ok"}), Error);
  EXPECT_NO_THROW(validate(Explanation{Method::cot, 5, "ok"}));
  EXPECT_THROW(validate(Explanation{Method::cot, 6, "ok"}), Error);
  EXPECT_THROW(validate(Explanation{Method::agent, 0, "ok"}), Error);
  EXPECT_THROW(validate(Explanation{Method::agent, 3, "  "}), Error);
}

TEST(PseudoLabel, EnsembleConsistencyOverAllVoteCombinations) {
  for (int mask = 0; mask < 8; ++mask) {
    const Label para = label_from_bool(mask & 1), cot = label_from_bool(mask & 2), agents = label_from_bool(mask & 4);
    const int votes = (mask & 1) + ((mask >> 1) & 1) + ((mask >> 2) & 1);
    EXPECT_EQ(combine_votes(para, cot, agents) == Label::cyberbullying, votes >= 2) << mask;
  }
}

TEST(PseudoLabel, JsonRoundTrip) {
  PseudoLabel p = tst::pseudo_for("c9", Label::cyberbullying);
  p.cot.explanations.front().index = 4;
  p.agent_labels[2] = Label::non_cyberbullying;
  p.parse_fallback_used = true;
  p.para.fallback = true;
  const PseudoLabel back = pseudo_label_from_json(json::parse(to_json(p).dump()));
  EXPECT_EQ(back, p);
}

TEST(Configs, VotingValidation) {
  EXPECT_NO_THROW(VotingConfig::majority().validate());
  EXPECT_NO_THROW(VotingConfig::unanimous().validate());
  VotingConfig v;
  v.internal_threshold = 1;  // not a majority of 3
  EXPECT_THROW(v.validate(), Error);
  v = {};
  v.external_threshold = 6;
  EXPECT_THROW(v.validate(), Error);
}

TEST(Configs, RuleAndForecastValidation) {
  RuleConfig r;
  EXPECT_NO_THROW(r.validate());
  r.rule1_ratio = 1.0;
  EXPECT_THROW(r.validate(), Error);
  r = {};
  r.rule2_min_intervals = 0;
  EXPECT_THROW(r.validate(), Error);
  ForecastConfig f;
  EXPECT_NO_THROW(f.validate());
  f.dlinear_kernel = 4;
  EXPECT_THROW(f.validate(), Error);
  f = {};
  f.window = 0;
  EXPECT_THROW(f.validate(), Error);
  f = {};
  f.horizon = 2;
  EXPECT_THROW(f.validate(), Error);
}

TEST(Text, Utf8LengthAndTrim) {
  EXPECT_EQ(utf8_length("好样的"), 3u);
  EXPECT_EQ(utf8_length("ab好"), 3u);
  EXPECT_EQ(trim("\xE3\x80\x80 x \n"), "x");
}
