#include "doctest.h"
#include "repro/error.hpp"
#include "repro/paper.hpp"
#include "test_util.hpp"

using namespace repro;

TEST_SUITE("paper") {

TEST_CASE("fixture paper segments into the expected paragraphs") {
    PaperDoc doc = load_paper(testutil::slurp(testutil::fixture("fixture_paper.md")), "fixture");
    REQUIRE(doc.paragraphs.size() == 14);
    CHECK(doc.title == "Gradient Echo Networks for Node Classification");

    CHECK(doc.paragraphs[0].kind == ParagraphKind::heading);
    CHECK(doc.paragraphs[2].kind == ParagraphKind::prose);
    CHECK(doc.paragraphs[7].kind == ParagraphKind::equation_block);
    CHECK(doc.paragraphs[9].kind == ParagraphKind::code_fence);

    // Prose sentence counts: abstract 2, intro 3, method 3, post-equation 2,
    // experiments 3, conclusion 1.
    CHECK(doc.paragraphs[2].sentences.size() == 2);
    CHECK(doc.paragraphs[4].sentences.size() == 3);
    CHECK(doc.paragraphs[6].sentences.size() == 3);
    CHECK(doc.paragraphs[8].sentences.size() == 2);
    CHECK(doc.paragraphs[11].sentences.size() == 3);
    CHECK(doc.paragraphs[13].sentences.size() == 1);

    // Blocks are kept whole as one pseudo-sentence.
    CHECK(doc.paragraphs[7].sentences.size() == 1);
    CHECK(doc.paragraphs[9].sentences.size() == 1);
    CHECK(doc.paragraphs[9].raw.find("train_step") != std::string::npos);

    // Sentence indices are 1-based and consecutive.
    for (const auto& p : doc.paragraphs)
        for (std::size_t i = 0; i < p.sentences.size(); ++i)
            CHECK(p.sentences[i].index == static_cast<int>(i) + 1);

    // Paragraph ids equal their position.
    for (std::size_t i = 0; i < doc.paragraphs.size(); ++i)
        CHECK(doc.paragraphs[i].id == static_cast<int>(i));
}

TEST_CASE("empty input is rejected") {
    CHECK_THROWS_AS(load_paper(""), EmptyDocument);
    CHECK_THROWS_AS(load_paper("  \n\n   \n"), EmptyDocument);
}

TEST_CASE("sentence splitting respects abbreviations") {
    auto texts = [](const std::vector<Sentence>& s) {
        std::vector<std::string> out;
        for (const auto& x : s) out.push_back(x.text);
        return out;
    };

    CHECK(texts(segment_sentences("We use SGD, e.g. with momentum. It works well.")) ==
          std::vector<std::string>{"We use SGD, e.g. with momentum.", "It works well."});
    CHECK(segment_sentences("See Fig. 2 for the learning curves.").size() == 1);
    CHECK(segment_sentences("Smith et al. 2020 proposed this approach.").size() == 1);
    CHECK(segment_sentences("A rate of 0.5 is used for dropout.").size() == 1);
    CHECK(texts(segment_sentences("Results appear in Sec. 4. The gains are large.")) ==
          std::vector<std::string>{"Results appear in Sec. 4.", "The gains are large."});
    CHECK(texts(segment_sentences("Is it fast? Yes. It runs in 2 ms!")) ==
          std::vector<std::string>{"Is it fast?", "Yes.", "It runs in 2 ms!"});
    CHECK(segment_sentences("").empty());
}

TEST_CASE("sentence splitting survives newlines and quotes") {
    auto s = segment_sentences("First line\ncontinues here. \"Quoted end.\" Second part starts.");
    REQUIRE(s.size() == 3);
    CHECK(s[0].text == "First line continues here.");
    CHECK(s[1].text == "\"Quoted end.\"");
}

TEST_CASE("whitespace normalization collapses runs") {
    CHECK(normalize_whitespace("a  b\t c\n\nd") == "a b c d");
    CHECK(normalize_whitespace("   lead and trail   ") == "lead and trail");
    CHECK(normalize_whitespace("") == "");
}

TEST_CASE("document round-trips through JSON") {
    PaperDoc doc = load_paper(testutil::slurp(testutil::fixture("fixture_paper.md")), "fixture");
    PaperDoc back = paper_doc_from_json(to_json(doc));
    REQUIRE(back.paragraphs.size() == doc.paragraphs.size());
    CHECK(back.title == doc.title);
    for (std::size_t i = 0; i < doc.paragraphs.size(); ++i) {
        CHECK(back.paragraphs[i].raw == doc.paragraphs[i].raw);
        CHECK(back.paragraphs[i].kind == doc.paragraphs[i].kind);
        CHECK(back.paragraphs[i].sentences.size() == doc.paragraphs[i].sentences.size());
    }
}

TEST_CASE("fenced block interrupted only by closing fence") {
    PaperDoc doc = load_paper("intro text\n\n```\ncode line\n\nstill code\n```\n\ntail text\n");
    REQUIRE(doc.paragraphs.size() == 3);
    CHECK(doc.paragraphs[1].kind == ParagraphKind::code_fence);
    CHECK(doc.paragraphs[1].raw.find("still code") != std::string::npos);
}

}  // TEST_SUITE
