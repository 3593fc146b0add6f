#include "support.hpp"

#include "silicon/survey.hpp"

#include <doctest.h>

#include <map>

using namespace silicon;
using testing::data;

namespace {

const SurveyDataset &anes_unit() {
    static const SurveyDataset ds = [] {
        LoadOptions opts;
        opts.weight_mode = WeightMode::unit;
        return load_survey(data("anes_shaped/survey.csv"), data("anes_shaped/schema.json"),
                           data("anes_shaped/questions.json"), opts);
    }();
    return ds;
}

DemographicSchema tiny_schema() {
    return DemographicSchema({testing::attribute("sex", {"M", "F"}), testing::attribute("race", {"A", "B"})});
}

std::string error_of(const std::string &csv, DemographicSchema schema = tiny_schema()) {
    try {
        (void)parse_survey(csv, std::move(schema), {testing::question("q", 2)});
    } catch (const SurveyError &e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("load_survey reads the full ANES-shaped file") {
    const auto &ds = anes_unit();
    CHECK(ds.respondents().size() == 6475);
    CHECK(ds.schema().size() == 4);
    CHECK(ds.questions().size() == 2);
    CHECK(ds.warnings.empty());
}

TEST_CASE("empty respondent section is valid but flagged") {
    const auto ds = parse_survey("id,weight,sex,race,q\n", tiny_schema(), {testing::question("q", 2)});
    CHECK(ds.empty());
    REQUIRE(ds.warnings.size() == 1);
}

TEST_CASE("load errors name the row") {
    CHECK(error_of("id,weight,sex,race,q\na,1,M,A,1\nb,-1,F,B,2\n") == "negative weight at row 3");
    CHECK(error_of("id,weight,sex,race,q\na,1,M,Z,1\n").find("undeclared level id") != std::string::npos);
    CHECK(error_of("id,weight,sex,race,q\na,1,M,A,7\n").find("row 2") != std::string::npos);
    CHECK(error_of("id,weight,sex,race,q\na,1,M,A\n").find("row 2") != std::string::npos);
    CHECK(error_of("id,weight,sex,race,q\na,1,M,A,1\na,1,F,B,2\n").find("duplicate") != std::string::npos);
    CHECK(error_of("id,weight,sex,q\na,1,M,1\n").find("race") != std::string::npos);
    CHECK_THROWS_AS((void)load_survey(data("nope.csv"), data("anes_shaped/schema.json"),
                                      data("anes_shaped/questions.json")),
                    SurveyError);
}

TEST_CASE("quoted cells and blank answers") {
    const auto ds = parse_survey("id,weight,sex,race,q\n\"a,1\",2,M,A,\n\"b\",1,\"F\",B,2\n", tiny_schema(),
                                 {testing::question("q", 2)});
    REQUIRE(ds.respondents().size() == 2);
    CHECK(ds.respondents()[0].id == "a,1");
    CHECK_FALSE(ds.respondents()[0].answers[0].has_value());
    CHECK(ds.respondents()[1].answers[0] == 2);
}

TEST_CASE("excluded levels drop respondents at load") {
    DemographicSchema schema({testing::attribute("sex", {"M", "F"}), testing::attribute("race", {"A", "B", "X"})},
                             {{"race", "X"}});
    const auto ds = parse_survey("id,weight,sex,race,q\na,1,M,A,1\nb,1,F,X,2\nc,1,F,B,2\n", schema,
                                 {testing::question("q", 2)});
    CHECK(ds.respondents().size() == 2);
    CHECK(ds.warnings.size() == 1);
    CHECK_THROWS_AS(SubgroupKey::parse("sex=F|race=X").validate(ds.schema()), SurveyError);
}

TEST_CASE("SubgroupKey parsing and refinement") {
    const auto k = SubgroupKey::parse("sex=M|race=B");
    CHECK(k.granularity() == 2);
    CHECK(k.to_string() == "sex=M|race=B");
    CHECK(SubgroupKey::parse("*") == SubgroupKey::population());
    CHECK(SubgroupKey::population().to_string() == "*");
    CHECK(k.refines(SubgroupKey::parse("sex=M")));
    CHECK(k.refines(SubgroupKey::population()));
    CHECK_FALSE(k.refines(SubgroupKey::parse("sex=F")));
    CHECK(k.truncated(1) == SubgroupKey::parse("sex=M"));
    CHECK_THROWS_AS(SubgroupKey::parse("race=B").validate(tiny_schema()), SurveyError);
    CHECK_THROWS_AS(SubgroupKey::parse("sex=Q").validate(tiny_schema()), SurveyError);
}

TEST_CASE("empirical_distribution weights answers") {
    const auto ds = testing::sex_race_dataset({{"M", "A", 1.0, 1}, {"F", "B", 3.0, 2}});
    const auto p = empirical_distribution(ds, "q", SubgroupKey::population());
    CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(p.support_weight() == 4.0);
}

TEST_CASE("missing answers are dropped before normalization") {
    const auto ds = testing::sex_race_dataset({{"M", "A", 1.0, 1}, {"F", "B", 3.0, std::nullopt}, {"F", "A", 1.0, 2}});
    const auto p = empirical_distribution(ds, "q", SubgroupKey::population());
    CHECK(p[0] == 0.5);
    CHECK(p.support_weight() == 2.0);
    CHECK_THROWS_AS((void)empirical_distribution(ds, "q", SubgroupKey::parse("sex=F|race=B")), EmptySubgroupError);
    CHECK_THROWS_AS((void)empirical_distribution(ds, "q", SubgroupKey::parse("sex=M|race=B")), EmptySubgroupError);
}

TEST_CASE("ANES abortion population distribution under unit weights") {
    // Oracle: marginal counts normalized over the non-missing total.
    const double counts[] = {627, 1463, 890, 3228, 235};
    const double total = 627 + 1463 + 890 + 3228 + 235;
    CHECK(total == 6443);
    const auto p = empirical_distribution(anes_unit(), "abortion", SubgroupKey::population());
    REQUIRE(p.size() == 5);
    for (std::size_t j = 0; j < 5; ++j) CHECK(p[j] == doctest::Approx(counts[j] / total).epsilon(1e-12));
    const double rounded[] = {0.0973, 0.2271, 0.1381, 0.5010, 0.0365};
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(p[j] - rounded[j]) < 5e-5);
    CHECK(p.support_weight() == total);
}

TEST_CASE("enumerate_subgroups on the ANES-shaped data") {
    const auto &ds = anes_unit();
    CHECK(enumerate_subgroups(ds, 0, "abortion").size() == 1);
    CHECK(enumerate_subgroups(ds, 4, "abortion").size() == 395);
    CHECK(enumerate_subgroups(ds, 4, "immigration").size() == 395);
    CHECK_THROWS_AS((void)enumerate_subgroups(ds, 5, "abortion"), SurveyError);

    const auto sexes = enumerate_subgroups(ds, 1, "abortion");
    REQUIRE(sexes.size() == 2);
    CHECK(sexes[0].key.to_string() == "sex=S1");
    CHECK(sexes[1].key.to_string() == "sex=S2");
    // Head counts per sex; support weights drop missing abortion answers.
    std::map<std::string, double> heads;
    for (const auto &r : ds.respondents()) heads[ds.key_of(r, 1).to_string()] += 1.0;
    CHECK(heads["sex=S1"] == 3101);
    CHECK(heads["sex=S2"] == 3374);
    CHECK(sexes[0].support_weight + sexes[1].support_weight == 6443);
    CHECK(sexes[0].support_weight <= 3101);
    CHECK(sexes[1].support_weight <= 3374);
}

TEST_CASE("enumerate_subgroups is in schema level order") {
    const auto subs = enumerate_subgroups(anes_unit(), 2, "immigration");
    for (std::size_t i = 1; i < subs.size(); ++i) {
        const auto &a = subs[i - 1].key.assignments();
        const auto &b = subs[i].key.assignments();
        const auto &schema = anes_unit().schema();
        const auto ia = std::pair(*schema.at(0).level_index(a[0].second), *schema.at(1).level_index(a[1].second));
        const auto ib = std::pair(*schema.at(0).level_index(b[0].second), *schema.at(1).level_index(b[1].second));
        CHECK(ia < ib);
    }
}

TEST_CASE("aggregate mixes by support weight") {
    const auto a = SubgroupKey::parse("sex=M|race=A");
    const auto b = SubgroupKey::parse("sex=M|race=B");
    const auto male = SubgroupKey::parse("sex=M");

    auto half = aggregate({{a, 1, AnswerDistribution("q", {1, 0})}, {b, 1, AnswerDistribution("q", {0, 1})}}, male);
    CHECK(half[0] == 0.5);
    CHECK(half[1] == 0.5);
    CHECK(half.support_weight() == 2.0);

    auto mix = aggregate({{a, 3, AnswerDistribution("q", {0.8, 0.2})}, {b, 1, AnswerDistribution("q", {0.4, 0.6})}},
                         male);
    CHECK(mix[0] == doctest::Approx((3 * 0.8 + 0.4) / 4).epsilon(1e-15));
    CHECK(mix[1] == doctest::Approx((3 * 0.2 + 0.6) / 4).epsilon(1e-15));

    const AnswerDistribution one("q", {0.3, 0.7});
    auto same = aggregate({{a, 2.5, one}}, male);
    CHECK(same.probs() == one.probs());

    CHECK_THROWS_AS((void)aggregate({{SubgroupKey::parse("sex=F|race=A"), 1, one}}, male), SurveyError);
    CHECK_THROWS_AS((void)aggregate({{a, 0, one}}, male), SurveyError);
    CHECK_THROWS_AS((void)aggregate({{a, 1, one}, {b, 1, AnswerDistribution("q", {0.2, 0.3, 0.5})}}, male),
                    SurveyError);
    CHECK_THROWS_AS((void)aggregate({{a, 1, one}, {b, 1, AnswerDistribution("other", {0.2, 0.8})}}, male),
                    SurveyError);
}

TEST_CASE("AnswerDistribution validation") {
    CHECK_THROWS_AS(AnswerDistribution("q", {0.5, 0.6}), SurveyError);
    CHECK_THROWS_AS(AnswerDistribution("q", {1.1, -0.1}), SurveyError);
    CHECK_THROWS_AS(AnswerDistribution("q", {}), SurveyError);
    CHECK(AnswerDistribution::delta("q", 3, 2).probs() == std::vector<double>{0, 1, 0});
    CHECK(AnswerDistribution::uniform("q", 4)[3] == 0.25);
}

TEST_CASE("weight mode switch") {
    const auto ds = testing::race_varying_males();
    CHECK(ds.weight_mode() == WeightMode::column);
    const auto unit = ds.with_weight_mode(WeightMode::unit);
    const auto p = empirical_distribution(unit, "q", SubgroupKey::parse("sex=M"));
    CHECK(p[0] == 0.5);
    CHECK(p.support_weight() == 4.0);
    CHECK(parse_weight_mode("unit") == WeightMode::unit);
    CHECK_THROWS((void)parse_weight_mode("both"));
}
