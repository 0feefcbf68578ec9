#include <doctest.h>

#include <fstream>
#include <sstream>

#include "causalmem/pipeline.hpp"
#include "test_support.hpp"

using namespace causalmem;

namespace {

const std::filesystem::path kData = CAUSALMEM_TEST_DATA;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

struct Built {
  testing::TempDir dir{"pipeline"};
  std::filesystem::path index_dir = dir / "idx";
  std::filesystem::path model = dir / "model.bin";
};

int build_index_dir(const Built& b) {
  std::ostringstream out, err;
  return cmd_index({kData / "toy_corpus.txt", b.index_dir, 1}, out, err);
}

TrainOptions quick_train(const Built& b) {
  TrainOptions t;
  t.data = kData / "toy_pairs.tsv";
  t.index_dir = b.index_dir;
  t.out_checkpoint = b.model;
  t.config.epochs = 20;
  return t;
}

}  // namespace

TEST_CASE("select_memories returns the top-k corpus lines in rank order") {
  const auto bundle = index_corpus({"rain fell", "the river flooded after rain", "heat melts ice",
                                    "rain rain flood", "quiet day"});
  const auto q = encode(tokenize("rain <CAUSES> flood"), bundle.vocab);

  const auto mem = select_memories(bundle.index, q, 5);
  const auto hits = bundle.index.top_k(q, 5);
  CHECK(mem.capacity == 5);
  REQUIRE(mem.size() == hits.size());
  CHECK(mem.size() == 3);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    CHECK(mem.sentences[i] == bundle.index.documents()[hits[i].doc_id]);
    CHECK(encode(tokenize(bundle.index.text(hits[i].doc_id)), bundle.vocab) == mem.sentences[i]);
  }

  const auto none = select_memories(bundle.index, encode({"zebra"}, bundle.vocab), 5);
  CHECK(none.empty());
  CHECK(select_memories(bundle.index, q, 1).size() == 1);
}

TEST_CASE("parse_causal_query validation") {
  const auto vocab = build_vocab({{"rain", "flood"}});
  CHECK(parse_causal_query("rain <CAUSES> flood", vocab) ==
        TokenSequence{vocab.id("rain"), kCausesId, vocab.id("flood")});
  CHECK_THROWS_AS(parse_causal_query("rain flood", vocab), std::invalid_argument);
  CHECK_THROWS_AS(parse_causal_query("a <causes> b <CAUSES> c", vocab), std::invalid_argument);
  CHECK_THROWS_AS(parse_causal_query("<CAUSES> flood", vocab), std::invalid_argument);
}

TEST_CASE("cmd_index writes the four files and reports counts") {
  Built b;
  std::ostringstream out, err;
  REQUIRE(cmd_index({kData / "toy_corpus.txt", b.index_dir, 1}, out, err) == 0);
  CHECK(out.str().find("N=50\n") == 0);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(b.index_dir)) {
    (void)e;
    ++files;
  }
  CHECK(files == 4);

  // rerun is byte-identical
  const auto before = slurp(b.index_dir / "postings.tsv") + slurp(b.index_dir / "corpus.txt") +
                      slurp(b.index_dir / "vocab.txt") + slurp(b.index_dir / "doclens.tsv");
  std::ostringstream out2, err2;
  REQUIRE(cmd_index({kData / "toy_corpus.txt", b.index_dir, 1}, out2, err2) == 0);
  const auto after = slurp(b.index_dir / "postings.tsv") + slurp(b.index_dir / "corpus.txt") +
                     slurp(b.index_dir / "vocab.txt") + slurp(b.index_dir / "doclens.tsv");
  CHECK(before == after);
  CHECK(out.str() == out2.str());
}

TEST_CASE("cmd_index failures") {
  Built b;
  {
    std::ofstream empty(b.dir / "empty.txt");
  }
  std::ostringstream out, err;
  CHECK(cmd_index({b.dir / "empty.txt", b.index_dir, 1}, out, err) != 0);
  CHECK(!err.str().empty());
  CHECK(cmd_index({b.dir / "nope.txt", b.index_dir, 1}, out, err) != 0);
}

TEST_CASE("train, eval and infer through the command layer") {
  Built b;
  REQUIRE(build_index_dir(b) == 0);

  auto opts = quick_train(b);
  std::ostringstream out, err;
  REQUIRE_MESSAGE(cmd_train(opts, out, err) == 0, err.str());
  CHECK(std::filesystem::exists(b.model));
  CHECK(std::filesystem::exists(b.dir / "vocab.txt"));
  const auto metrics = lines_of(slurp(default_metrics_path(b.model)));
  REQUIRE(metrics.size() == 20);
  CHECK(metrics.front().rfind("1\t", 0) == 0);
  CHECK(std::count(metrics.back().begin(), metrics.back().end(), '\t') == 2);

  const auto params = load_checkpoint(b.model);
  CHECK(params.hops() == 2);
  CHECK(params.dim() == 20);

  std::ostringstream eval_out, eval_err;
  REQUIRE(cmd_eval({kData / "toy_pairs.tsv", b.index_dir, b.model, 0.5}, eval_out, eval_err) == 0);
  const auto report = lines_of(eval_out.str());
  REQUIRE(report.size() == 7);
  CHECK(report[0] == "total=40");
  CHECK(report[2].rfind("accuracy=", 0) == 0);
  std::ostringstream eval_again, unused;
  cmd_eval({kData / "toy_pairs.tsv", b.index_dir, b.model, 0.5}, eval_again, unused);
  CHECK(eval_again.str() == eval_out.str());

  std::ostringstream inf_out, inf_err;
  REQUIRE(cmd_infer({b.index_dir, b.model, "rain <CAUSES> flood", 10}, inf_out, inf_err) == 0);
  const auto inf = lines_of(inf_out.str());
  REQUIRE(!inf.empty());
  CHECK(inf.size() <= 11);
  CHECK(inf.back().rfind("p_causes=", 0) == 0);
  const double p = std::stod(inf.back().substr(9));
  CHECK(p >= 0.0);
  CHECK(p <= 1.0);

  SUBCASE("query with no corpus overlap still scores") {
    std::ostringstream o, e;
    REQUIRE(cmd_infer({b.index_dir, b.model, "zyzzyva <CAUSES> quux", 10}, o, e) == 0);
    const auto l = lines_of(o.str());
    REQUIRE(l.size() == 1);
    CHECK(l[0].rfind("p_causes=", 0) == 0);
  }
  SUBCASE("malformed query") {
    std::ostringstream o, e;
    CHECK(cmd_infer({b.index_dir, b.model, "rain flood", 10}, o, e) != 0);
    CHECK(e.str().find("usage") != std::string::npos);
    CHECK(o.str().empty());
  }
  SUBCASE("probability survives a checkpoint reload") {
    const auto ctx = load_model_context(b.index_dir, b.model);
    const auto first = infer(ctx, "heat <CAUSES> melt", 10);
    const auto ctx2 = load_model_context(b.index_dir, b.model);
    CHECK(infer(ctx2, "heat <CAUSES> melt", 10).p_causes == first.p_causes);
  }
  SUBCASE("empty test file") {
    {
      std::ofstream f(b.dir / "empty.tsv");
      f << "# nothing\n";
    }
    std::ostringstream o, e;
    CHECK(cmd_eval({b.dir / "empty.tsv", b.index_dir, b.model, 0.5}, o, e) != 0);
  }
  SUBCASE("vocabulary mismatch") {
    testing::TempDir other("other_index");
    std::ostringstream o, e;
    REQUIRE(cmd_index({kData / "eval_fixture_62.tsv", other.path(), 1}, o, e) == 0);
    CHECK(cmd_eval({kData / "toy_pairs.tsv", other.path(), b.model, 0.5}, o, e) != 0);
    CHECK(e.str().find("vocabulary mismatch") != std::string::npos);
    CHECK(cmd_infer({other.path(), b.model, "rain <CAUSES> flood", 10}, o, e) != 0);
  }
}

TEST_CASE("cmd_train options") {
  Built b;
  REQUIRE(build_index_dir(b) == 0);

  SUBCASE("untied, one hop, explicit metrics path") {
    auto opts = quick_train(b);
    opts.config.hops = 1;
    opts.config.tying = Tying::kUntied;
    opts.metrics = b.dir / "m.tsv";
    std::ostringstream out, err;
    REQUIRE(cmd_train(opts, out, err) == 0);
    const auto params = load_checkpoint(b.model);
    CHECK(params.hops() == 1);
    CHECK(params.shape().tying == Tying::kUntied);
    CHECK(lines_of(slurp(b.dir / "m.tsv")).size() == 20);
  }
  SUBCASE("synthesized negatives") {
    auto opts = quick_train(b);
    opts.synthesize_negatives = true;
    opts.config.epochs = 2;
    std::ostringstream out, err;
    REQUIRE(cmd_train(opts, out, err) == 0);
    CHECK(out.str().find("examples=60\n") == 0);  // 15 positives x (1 + 3)
  }
  SUBCASE("bad inputs") {
    auto opts = quick_train(b);
    opts.data = b.dir / "missing.tsv";
    std::ostringstream out, err;
    CHECK(cmd_train(opts, out, err) != 0);
    opts = quick_train(b);
    opts.index_dir = b.dir / "no_index";
    CHECK(cmd_train(opts, out, err) != 0);
  }
}
