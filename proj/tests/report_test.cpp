#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <sstream>
#include <string>
#include <vector>

#include "mtm/report.hpp"
#include "test_support.hpp"

namespace mtm {
namespace {

auto lines_of(const std::string& text) -> std::vector<std::string>
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

TEST(Report, MetadataKeepsInsertionOrder)
{
    Metadata meta("ambiguity-single");
    meta.set("seed", 7).set("epsilon_mode", "relative");
    const auto& j = meta.json();
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    EXPECT_EQ(keys, (std::vector<std::string>{"software", "version", "command", "seed", "epsilon_mode"}));
    std::ostringstream os;
    meta.write_comment_lines(os);
    EXPECT_EQ(lines_of(os.str())[3], "# seed: 7");
    EXPECT_EQ(lines_of(os.str())[4], "# epsilon_mode: relative");
}

TEST(Report, JsonLinesStartWithMetadata)
{
    FlipReport r;
    r.row_id = "r1";
    r.kappa = 2;
    r.baseline_rank = 3;
    r.min_rank = 1;
    r.max_rank = 4;
    r.flippable = true;
    r.witness = Eigen::Vector2d(0.25, 0.75);
    std::vector<FlipReport> reports{r, FlipReport{}};
    std::ostringstream os;
    write_jsonl(os, Metadata("ambiguity-multi"), reports, "witness_alpha");
    const auto lines = lines_of(os.str());
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(Json::parse(lines[0])["metadata"]["command"], "ambiguity-multi");
    const auto first = Json::parse(lines[1]);
    EXPECT_EQ(first["row_id"], "r1");
    EXPECT_EQ(first["witness_alpha"][1], 0.75);
    EXPECT_EQ(first["method"], "mip_certified");
    EXPECT_TRUE(Json::parse(lines[2])["witness_alpha"].is_null());
}

TEST(Report, CurveTableIsPlotReady)
{
    CurvePoint p;
    p.epsilon_input = 0.1;
    p.epsilon = 2.5;
    p.ambiguity_all = 0.02;
    p.ambiguity_top = 0.1;
    p.flippable = 4;
    const std::vector<CurvePoint> curve{p};
    std::ostringstream os;
    write_table(os, Metadata("ambiguity-single"), curve_table(curve, "cost, total"));
    const auto lines = lines_of(os.str());
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[3], "epsilon,ambiguity_all,ambiguity_top,target,epsilon_absolute,flippable,undetermined");
    EXPECT_EQ(lines[4], "0.1,0.02,0.1,\"cost, total\",2.5,4,0");
}

TEST(Report, StableTableColumns)
{
    StableSweepPoint p;
    p.kappa = 10;
    p.stable_fraction = 0.6;
    p.stable_selected = 6;
    const std::vector<StableSweepPoint> sweep{p};
    const auto t = stable_table(sweep, Family::index);
    EXPECT_EQ(t.header, (std::vector<std::string>{"kappa", "stable_fraction", "family", "stable_selected", "undetermined"}));
    EXPECT_EQ(t.rows[0], (std::vector<std::string>{"10", "0.6", "index", "6", "0"}));
}

TEST(Report, InstanceDumpListsEveryLinkingRow)
{
    Eigen::MatrixXd P(4, 2);
    P << 1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 0.2, 0.1;
    const auto inst = testing::simplex_instance(P, MipFamily::group_rate, {0, 2}, 2, Direction::maximize);
    const auto j = instance_to_json(inst);
    EXPECT_EQ(j["family"], to_string(MipFamily::group_rate));
    EXPECT_EQ(j["direction"], "max");
    EXPECT_EQ(j["region"]["type"], "soft_simplex");
    EXPECT_EQ(j["linking_rows"].size(), 6u);
    EXPECT_EQ(j["scores"].size(), 4u);
}

TEST(Report, NumbersRoundTripAtTwelveDigits)
{
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
    EXPECT_EQ(format_number(1e-20), "1e-20");
}

} // namespace
} // namespace mtm
