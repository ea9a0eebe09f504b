#include <doctest.h>

#include <sstream>

#include "frisk/csv.hpp"
#include "frisk/error.hpp"
#include "frisk/io.hpp"
#include "helpers.hpp"

using namespace frisk;
using nlohmann::json;

TEST_CASE("csv parsing handles quotes, embedded commas and line breaks") {
    auto rows = csv::parse("a,b\n\"x,1\",\"say \"\"hi\"\"\"\n\"multi\nline\",z\n", "t.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1].fields == std::vector<std::string>{"x,1", "say \"hi\""});
    CHECK(rows[2].fields == std::vector<std::string>{"multi\nline", "z"});
    CHECK(rows[2].line == 3);
    CHECK_THROWS_AS(csv::parse("a,\"open\n", "t.csv"), ParseError);
}

TEST_CASE("csv escaping round trips") {
    std::ostringstream os;
    csv::write_row(os, {"plain", "with,comma", "q\"uote", "line\nbreak"});
    auto rows = csv::parse(os.str(), "rt");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].fields == std::vector<std::string>{"plain", "with,comma", "q\"uote", "line\nbreak"});
    CHECK(csv::escape("plain") == "plain");
}

TEST_CASE("real formatting") {
    CHECK(csv::format_real(0.15) == "0.15");
    CHECK(csv::format_real(2.89) == "2.89");
    CHECK(csv::format_real(1.0 / 3.0) == "0.333333333");
    CHECK(csv::format_real(0.0) == "0");
    CHECK(csv::format_fixed9(0.15) == "0.150000000");
    CHECK(csv::parse_real("0.25", "x") == 0.25);
    CHECK_THROWS_AS(csv::parse_real("0.25x", "x"), ParseError);
    CHECK_THROWS_AS(csv::parse_int("2.5", "x"), ParseError);
}

namespace {

json small_network_doc() {
    return json{{"features", {"city", "photo_visibility"}},
                {"nodes",
                 {{{"id", "u"}, {"profile", {{"city", "milano"}, {"photo_visibility", "visible"}}}},
                  {{"id", "a"}, {"profile", {{"city", "milano"}}}},
                  {{"id", "s"}, {"profile", json::object()}}}},
                {"edges", json::array({json::array({"u", "a"}), json::array({"a", "s"})})}};
}

} // namespace

TEST_CASE("network JSON parses and round trips") {
    auto net = io::parse_network(small_network_doc(), "net.json");
    CHECK(net.node_count() == 3);
    CHECK(net.value(net.index_of("s"), 0) == "hidden");
    auto again = io::parse_network(io::network_to_json(net), "again");
    CHECK(again.edges() == net.edges());
    for (const auto& id : net.nodes())
        CHECK(again.profile(again.index_of(id)) == net.profile(net.index_of(id)));
}

TEST_CASE("network JSON errors carry a locus") {
    auto doc = small_network_doc();
    doc["nodes"][1]["profile"]["country"] = "it";
    CHECK_THROWS_WITH_AS(io::parse_network(doc, "net.json"), doctest::Contains("nodes[1].profile.country"),
                         ParseError);

    doc = small_network_doc();
    doc["nodes"][2].erase("id");
    CHECK_THROWS_WITH_AS(io::parse_network(doc, "net.json"), doctest::Contains("nodes[2].id"), ParseError);

    doc = small_network_doc();
    doc["edges"].push_back(json::array({"u", "ghost"}));
    CHECK_THROWS_WITH_AS(io::parse_network(doc, "net.json"), doctest::Contains("ghost"), ParseError);

    doc = small_network_doc();
    doc["nodes"][0]["profile"]["photo_visibility"] = "friends-only";
    CHECK_THROWS_AS(io::parse_network(doc, "net.json"), ParseError);
}

TEST_CASE("truncated network file is a parse error") {
    testing::TempDir dir("io");
    io::write_text(dir.file("net.json"), small_network_doc().dump().substr(0, 40));
    CHECK_THROWS_AS(io::read_network(dir.file("net.json")), ParseError);
}

TEST_CASE("labels CSV collects every row error") {
    auto parsed = io::parse_labels("user_id,stranger_id,label\nu,s,1\nu,t,4\nu,v,x\nu,w\n", "labels.csv");
    CHECK(parsed.records.size() == 1);
    REQUIRE(parsed.issues.size() == 3);
    CHECK(parsed.issues[0].locus == "labels.csv:3");
    CHECK(parsed.issues[0].message.find("label 4") != std::string::npos);
    CHECK(parsed.issues[1].locus == "labels.csv:4");
    CHECK(parsed.issues[2].locus == "labels.csv:5");

    auto bad_header = io::parse_labels("user,stranger,label\n", "l.csv");
    CHECK(bad_header.issues.size() == 1);
}

TEST_CASE("labels and continuous labels round trip") {
    testing::TempDir dir("io");
    std::vector<RiskLabelRecord> records{{"u,1", "s", 1}, {"u", "t", 3}};
    io::write_labels(dir.file("l.csv"), records);
    CHECK(io::read_labels(dir.file("l.csv")) == records);

    std::map<RecordKey, double> values{{{"u", "s"}, 2.3}, {{"u", "t"}, 1.0 / 3.0}};
    io::write_continuous_labels(dir.file("c.csv"), values);
    auto back = io::read_continuous_labels(dir.file("c.csv"));
    CHECK(back.at({"u", "s"}) == 2.3);
    CHECK(back.at({"u", "t"}) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

    io::write_text(dir.file("d.csv"), "user_id,stranger_id,label\nu,s,1\nu,s,2\n");
    CHECK_THROWS_AS(io::read_labels(dir.file("d.csv")), ParseError);
}
