#include <doctest.h>

#include <set>

#include "../support/temp_dir.hpp"
#include "terse/corpus.hpp"
#include "terse/error.hpp"

using namespace terse;

namespace {

query_record rec(std::string id, split_kind split = split_kind::test, std::string dataset = "toy") {
    query_record r;
    r.id = std::move(id);
    r.dataset = std::move(dataset);
    r.split = split;
    r.question = "question " + r.id;
    r.target_answer = "answer for " + r.id;
    return r;
}

corpus make(std::size_t n, split_kind split = split_kind::test, std::string dataset = "toy") {
    std::vector<query_record> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(rec("q" + std::to_string(i), split, dataset));
    return corpus(std::move(v));
}

}  // namespace

TEST_CASE("load_corpus reads records in file order") {
    testing::temp_dir dir;
    testing::write_file(dir / "c.jsonl",
                        R"({"id":"a","dataset":"dolly","split":"test","question":"Give five ideas for a sandwich.","target_answer":"Instead of jelly, try honey."}
{"id":"b","split":"train","context":"Paris is the capital.","question":"Capital?","target_answer":"Paris"}

{"id":"c","split":"validation","question":"Q","target_answer":"A"}
)");
    auto c = load_corpus(dir / "c.jsonl", "fallback");
    REQUIRE(c.size() == 3);
    CHECK(c.records()[0].id == "a");
    CHECK(c.records()[0].dataset == "dolly");
    CHECK_FALSE(c.records()[0].context.has_value());
    CHECK(c.records()[1].dataset == "fallback");
    CHECK(c.records()[1].context == "Paris is the capital.");
    CHECK(c.records()[2].split == split_kind::validation);
    CHECK(c.find("b") != nullptr);
    CHECK(c.find("zz") == nullptr);
}

TEST_CASE("load_corpus errors") {
    testing::temp_dir dir;
    CHECK_THROWS_AS(load_corpus(dir / "missing.jsonl"), file_not_found);

    testing::write_file(dir / "bad.jsonl", R"({"id":"a","split":"test","question":"Q","target_answer":"A"}
{"id":"b","split":"test","target_answer":"A"}
)");
    try {
        load_corpus(dir / "bad.jsonl", "toy");
        FAIL("expected parse_error");
    } catch (const parse_error& e) {
        CHECK(e.line() == 2);
    }

    testing::write_file(dir / "dup.jsonl", R"({"id":"a","split":"test","question":"Q","target_answer":"A"}
{"id":"a","split":"test","question":"Q","target_answer":"A"}
)");
    CHECK_THROWS_WITH_AS(load_corpus(dir / "dup.jsonl", "toy"), doctest::Contains("duplicate"), parse_error);

    testing::write_file(dir / "empty.jsonl", "\n\n");
    CHECK_THROWS_AS(load_corpus(dir / "empty.jsonl"), empty_corpus);

    testing::write_file(dir / "junk.jsonl", "{not json}\n");
    CHECK_THROWS_AS(load_corpus(dir / "junk.jsonl"), parse_error);
}

TEST_CASE("ingestion is lossless") {
    testing::temp_dir dir;
    auto r = rec("x1");
    r.context = "ctx \"quoted\"\nline two ü";
    r.extra_answers = {"alt one", "alt two"};
    r.target_length = 3;
    auto r2 = rec("x2", split_kind::train);
    corpus c({r, r2});
    write_corpus(c, dir / "out.jsonl");
    auto back = load_corpus(dir / "out.jsonl");
    CHECK(back == c);
}

TEST_CASE("sample_split is deterministic and without replacement") {
    auto c = make(5000);
    auto a = sample_split(c, split_kind::test, 1024, 7);
    auto b = sample_split(c, split_kind::test, 1024, 7);
    CHECK(a.size() == 1024);
    CHECK(a == b);
    std::set<std::string> ids;
    for (const auto& r : a.records()) ids.insert(r.id);
    CHECK(ids.size() == 1024);
    CHECK_FALSE(sample_split(c, split_kind::test, 1024, 8) == a);

    auto whole = sample_split(c, split_kind::test, 5000, 3);
    CHECK(whole.size() == 5000);
    CHECK_FALSE(whole == c);  // permuted

    CHECK(sample_split(c, split_kind::test, 0, 1).empty());
    CHECK_THROWS_AS(sample_split(c, split_kind::test, 6000, 1), insufficient_records);
    CHECK(sample_split(c, split_kind::test, 6000, 1, false).size() == 5000);
    CHECK(sample_split(c, split_kind::train, 5, 1, false).empty());
}

TEST_CASE("sample_split depends only on content, split, n and seed") {
    std::vector<query_record> v;
    for (int i = 0; i < 50; ++i) v.push_back(rec("t" + std::to_string(i)));
    for (int i = 0; i < 50; ++i) v.push_back(rec("u" + std::to_string(i), split_kind::train));
    corpus mixed(v);
    std::vector<query_record> only_test(v.begin(), v.begin() + 50);
    CHECK(sample_split(mixed, split_kind::test, 10, 42) == sample_split(corpus(only_test), split_kind::test, 10, 42));
}

TEST_CASE("build_train_pool namespaces ids") {
    auto dolly = make(20, split_kind::train, "dolly");
    auto gooaq = make(20, split_kind::train, "gooaq");
    auto pool = build_train_pool({dolly, gooaq}, 10, 1);
    CHECK(pool.size() == 20);
    CHECK(pool.find("dolly/q1") != nullptr);
    CHECK(pool.find("gooaq/q1") != nullptr);

    auto small = build_train_pool({make(15, split_kind::train, "a")}, 10, 0);
    CHECK(small.size() == 10);

    CHECK_THROWS_AS(build_train_pool({make(5, split_kind::train, "a")}, 10, 0), insufficient_records);
    auto lenient = build_train_pool({make(5, split_kind::train, "a"), make(30, split_kind::train, "b")}, 10, 0, false);
    CHECK(lenient.size() == 15);
}

TEST_CASE("dataset adapters") {
    testing::temp_dir dir;
    testing::write_file(dir / "dolly.jsonl",
                        R"({"instruction":"Give five ideas for a sandwich.","context":"","response":"Instead of jelly, try honey.","category":"brainstorming"}
)");
    auto d = ingest_source(dir / "dolly.jsonl", source_format::dolly, "dolly", split_kind::train);
    REQUIRE(d.size() == 1);
    CHECK(d.records()[0].id == "1");
    CHECK_FALSE(d.records()[0].context.has_value());
    CHECK(d.records()[0].target_length == 5);

    testing::write_file(dir / "ms.jsonl",
                        R"({"query_id":19699,"query":"what is rba","answers":["Results-Based Accountability","RBA"],"passages":[{"is_selected":0,"passage_text":"no"},{"is_selected":1,"passage_text":"yes"}]}
)");
    auto m = ingest_source(dir / "ms.jsonl", source_format::msmarco, "msmarco", split_kind::test);
    CHECK(m.records()[0].id == "19699");
    CHECK(m.records()[0].target_answer == "Results-Based Accountability");
    CHECK(m.records()[0].extra_answers == std::vector<std::string>{"RBA"});
    CHECK(m.records()[0].context == "yes");

    testing::write_file(dir / "tweet.jsonl", R"({"qid":"t1","Question":"who?","Answer":["me"],"Tweet":"hello"}
)");
    auto t = ingest_source(dir / "tweet.jsonl", source_format::tweetqa, "tweetqa", split_kind::test);
    CHECK(t.records()[0].context == "hello");

    testing::write_file(dir / "nqa.jsonl",
                        R"({"document":{"summary":{"text":"A story."}},"question":{"text":"What?"},"answers":[{"text":"Thing"}]}
)");
    auto n = ingest_source(dir / "nqa.jsonl", source_format::narrativeqa, "narrativeqa", split_kind::test);
    CHECK(n.records()[0].question == "What?");
    CHECK(n.records()[0].context == "A story.");

    testing::write_file(dir / "gooaq.jsonl", R"({"id":5,"question":"is it?","answer":"","short_answer":"yes"}
)");
    auto g = ingest_source(dir / "gooaq.jsonl", source_format::gooaq, "gooaq", split_kind::test);
    CHECK(g.records()[0].target_answer == "yes");

    testing::write_file(dir / "bad.jsonl", R"({"instruction":"x"}
)");
    CHECK_THROWS_AS(ingest_source(dir / "bad.jsonl", source_format::dolly, "dolly", split_kind::test), parse_error);
}
