#include <doctest.h>

#include <set>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "selfage/pipeline.hpp"

#ifndef SELFAGE_STUB_PLUGIN
#error "SELFAGE_STUB_PLUGIN must be defined"
#endif

using namespace selfage;
using fixtures::make_post;
using json = nlohmann::json;

namespace {

// Labels a fixed set of ids as Age.
class ListClassifier final : public Classifier {
 public:
  explicit ListClassifier(std::set<std::string> age_ids) : age_ids_(std::move(age_ids)) {}
  std::vector<Prediction> classify(std::span<const Post> posts) override {
    std::vector<Prediction> out;
    for (const auto& p : posts) {
      const bool age = age_ids_.contains(p.id);
      out.push_back({p.id, age ? Label::Age : Label::NoAge, age ? 1.0 : -1.0});
    }
    return out;
  }
  std::string name() const override { return "list"; }

 private:
  std::set<std::string> age_ids_;
};

ClassifierFactory list_factory(std::set<std::string> ids) {
  return [ids] { return std::make_unique<ListClassifier>(ids); };
}

std::vector<Post> funnel_fixture() {
  auto rt = make_post("p9", "I'm 23 and loving it", "u9", 1567339209);
  rt.is_retweet = true;
  return {
      make_post("p1", "I'm 21 today", "u1", 1567339201),
      make_post("p2", "finally turned 30 last week", "u2", 1567339202),
      make_post("p3", "can't wait for my 18th birthday!", "u3", 1567339203),
      make_post("p4", "I am 40 and tired", "u4", 1567339204),
      make_post("p5", "at 25 I moved to the city", "u5", 1567339205),
      make_post("p6", "hello world", "u6", 1567339206),
      make_post("p7", "coffee time", "u7", 1567339207),
      make_post("p8", "RT @pal: I'm 22 now", "u8", 1567339208),
      rt,
      make_post("p10", "\"I just turned 30\" says the singer", "u10", 1567339210),
  };
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> out;
  std::istringstream in(fixtures::read_file(path));
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

PipelineConfig config_for(const fixtures::TempDir& dir, const std::vector<Post>& posts,
                          const std::string& out = "out") {
  save_posts(dir / "in.jsonl", posts, PostFormat::Jsonl);
  PipelineConfig c;
  c.inputs = {dir / "in.jsonl"};
  c.output_dir = dir / out;
  c.batch_size = 3;
  return c;
}

void check_funnel(const PipelineReport& r) {
  CHECK(r.candidates_matched >= r.age_classified);
  CHECK(r.age_classified >= r.ages_extracted);
  CHECK(r.posts_scanned >= r.retweets_dropped + r.reported_speech_dropped + r.candidates_matched);
  CHECK(r.users_scanned >= r.users_matched);
  CHECK(r.users_matched >= r.users_with_age);
}

}  // namespace

TEST_CASE("rollup keeps every extraction and picks the latest age") {
  const auto t = [](std::int64_t s) { return Timestamp{std::chrono::seconds{s}}; };
  const std::vector<DatedExtraction> one = {{"u", "a", t(0), 21, "r"}};
  CHECK(rollup_user(one).latest_age == 21);

  const std::vector<DatedExtraction> two = {{"u", "new", t(1514764800), 21, "r"},
                                            {"u", "old", t(1420070400), 19, "r"}};
  const auto rec = rollup_user(two);
  CHECK(rec.latest_age == 21);
  CHECK(rec.extractions.size() == 2);
  CHECK(rec.user_id == "u");

  const std::vector<DatedExtraction> tie = {{"u", "a", t(5), 20, "r"}, {"u", "b", t(5), 21, "r"}};
  CHECK(rollup_user(tie).latest_age == 21);

  CHECK_THROWS_AS(rollup_user({}), ValidationError);
  const std::vector<DatedExtraction> mixed = {{"u", "a", t(5), 20, "r"}, {"v", "b", t(5), 21, "r"}};
  CHECK_THROWS_AS(rollup_user(mixed), ValidationError);
}

TEST_CASE("ten-post funnel") {
  fixtures::TempDir dir;
  const auto config = config_for(dir, funnel_fixture());
  const auto report = run_pipeline(config, list_factory({"p1", "p2", "p3"}));
  CHECK(report.posts_scanned == 10);
  CHECK(report.retweets_dropped == 2);
  CHECK(report.reported_speech_dropped == 1);
  CHECK(report.candidates_matched == 5);
  CHECK(report.age_classified == 3);
  CHECK(report.ages_extracted == 3);
  CHECK(report.users_scanned == 10);
  CHECK(report.users_matched == 5);
  CHECK(report.users_with_age == 3);
  CHECK(report.classifier == "list");
  check_funnel(report);

  const auto posts = read_jsonl(config.output_dir / "posts.jsonl");
  REQUIRE(posts.size() == 5);
  CHECK(posts[0]["post_id"] == "p1");
  CHECK(posts[0]["age"] == 21);
  CHECK(posts[0]["created_at"] == "2019-09-01T12:00:01Z");
  CHECK(posts[1]["age"] == 30);
  CHECK(posts[2]["age"] == 17);
  CHECK(posts[3]["label"] == "no_age");
  CHECK_FALSE(posts[3].contains("age"));
  for (const auto& p : posts) CHECK(p.contains("pattern_id"));

  const auto users = read_jsonl(config.output_dir / "users.jsonl");
  REQUIRE(users.size() == 3);
  CHECK(users[0]["user_id"] == "u1");
  CHECK(users[0]["latest_age"] == 21);

  const auto doc = json::parse(fixtures::read_file(config.output_dir / "report.json"));
  CHECK(doc["counts"]["candidates_matched"] == 5);
  CHECK(doc["fractions"]["age_classified_of_candidates_matched"] == doctest::Approx(0.6));
  CHECK_FALSE(std::filesystem::exists(config.output_dir / "posts.jsonl.partial"));
}

TEST_CASE("reference rule examples through the pipeline with an always-age plug-in") {
  fixtures::TempDir dir;
  std::vector<Post> posts;
  for (std::size_t i = 0; i < fixtures::kRuleExamples.size(); ++i) {
    posts.push_back(make_post("t" + std::to_string(i), fixtures::kRuleExamples[i].text,
                              "u" + std::to_string(i), 1567339200 + static_cast<int>(i)));
  }
  auto config = config_for(dir, posts);
  config.plugin_command = std::string(SELFAGE_STUB_PLUGIN) + " --mode age";
  config.parallelism = 2;
  const auto report = run_pipeline(config);
  CHECK(report.ages_extracted == 10);
  CHECK(report.classifier == "stub-age");
  const auto out = read_jsonl(config.output_dir / "posts.jsonl");
  REQUIRE(out.size() == 10);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i]["post_id"] == posts[i].id);
    CHECK_MESSAGE(out[i]["age"] == fixtures::kRuleExamples[i].age, posts[i].text);
  }
}

TEST_CASE("reruns and worker counts give byte-identical records") {
  fixtures::TempDir dir;
  std::vector<Post> posts = funnel_fixture();
  for (int i = 0; i < 200; ++i) {
    posts.push_back(make_post("x" + std::to_string(i), "I'm " + std::to_string(10 + i % 90) +
                                                           " and my " + std::to_string(i % 3) + " cats",
                              "user" + std::to_string(i % 13), 1500000000 + i));
  }
  auto a = config_for(dir, posts, "a");
  auto b = a;
  b.output_dir = dir / "b";
  auto c = a;
  c.output_dir = dir / "c";
  c.parallelism = 4;
  c.batch_size = 64;
  const auto factory = list_factory({"p1", "p2", "p3", "x1", "x5", "x50", "x199"});
  const auto ra = run_pipeline(a, factory);
  const auto rb = run_pipeline(b, factory);
  const auto rc = run_pipeline(c, factory);
  CHECK(ra == rb);
  CHECK(ra == rc);
  check_funnel(ra);
  for (const std::string file : {"posts.jsonl", "users.jsonl", "report.json"}) {
    CHECK(fixtures::read_file(a.output_dir / file) == fixtures::read_file(b.output_dir / file));
    CHECK(fixtures::read_file(a.output_dir / file) == fixtures::read_file(c.output_dir / file));
  }
}

TEST_CASE("empty input gives an all-zero report") {
  fixtures::TempDir dir;
  const auto config = config_for(dir, {});
  const auto report = run_pipeline(config, list_factory({}));
  CHECK(report == PipelineReport{0, 0, 0, 0, 0, 0, 0, 0, 0, "list"});
  CHECK(fixtures::read_file(config.output_dir / "posts.jsonl").empty());
  CHECK(fixtures::read_file(config.output_dir / "users.jsonl").empty());
}

TEST_CASE("failures are tagged with their stage and leave only partial files") {
  fixtures::TempDir dir;
  auto config = config_for(dir, funnel_fixture());
  config.plugin_command = std::string(SELFAGE_STUB_PLUGIN) + " --mode crash";
  config.plugin_retries = 0;
  try {
    run_pipeline(config);
    FAIL("expected a pipeline error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "classify");
  }
  CHECK(std::filesystem::exists(config.output_dir / "posts.jsonl.partial"));
  CHECK_FALSE(std::filesystem::exists(config.output_dir / "posts.jsonl"));

  fixtures::write_file(dir / "bad.jsonl", "{\"id\":\"1\"}\n");
  PipelineConfig bad;
  bad.inputs = {dir / "bad.jsonl"};
  bad.output_dir = dir / "bad-out";
  try {
    run_pipeline(bad, list_factory({}));
    FAIL("expected a pipeline error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "ingest");
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }

  PipelineConfig missing;
  missing.inputs = {dir / "nope.jsonl"};
  missing.output_dir = dir / "x";
  CHECK_THROWS_AS(run_pipeline(missing, list_factory({})), PipelineError);

  PipelineConfig both;
  both.model_path = dir / "m.json";
  both.plugin_command = "cat";
  CHECK_THROWS_AS(make_classifier_factory(both), PipelineError);
  auto zero = config;
  zero.parallelism = 0;
  CHECK_THROWS_AS(run_pipeline(zero, list_factory({})), PipelineError);
}
