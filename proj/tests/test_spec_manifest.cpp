#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "eci/constraint_spec.hpp"
#include "eci/manifest.hpp"
#include "eci/serialize.hpp"

using namespace eci;
namespace fs = std::filesystem;

namespace {
Domain stokes16() { return family_domain(Family::stokes, 16, 16); }
}

TEST(ConstraintSpec, Identity) {
    EXPECT_TRUE(std::holds_alternative<Identity>(build_constraint(json{{"type", "identity"}}, stokes16())));
}

TEST(ConstraintSpec, IcFromFamily) {
    const auto c = build_constraint(json::parse(R"({"type":"ic","family":"stokes","params":{"k":5,"omega":6}})"),
                                    stokes16());
    const auto& v = std::get<ValueConstraint>(c);
    EXPECT_EQ(v.mask(), ic_mask(stokes16()));
    EXPECT_DOUBLE_EQ(v.targets()[16], stokes_exact(StokesParams{2.0, 6.0, 5.0}, stokes16().axis(0).coordinate(1), 0.0));
}

TEST(ConstraintSpec, ExplicitValues) {
    json j{{"type", "bc"}, {"values", std::vector<double>(16, 1.5)}};
    const auto& v = std::get<ValueConstraint>(build_constraint(j, stokes16()));
    EXPECT_EQ(v.targets()[3], 1.5);
    j["values"] = std::vector<double>(3, 1.0);
    EXPECT_THROW(build_constraint(j, stokes16()), data_error);
}

TEST(ConstraintSpec, ValueMaskVariants) {
    const auto d = stokes16();
    auto a = build_constraint(json::parse(R"({"type":"value_mask","points":[[0,1],[2,3]],"values":[4,5]})"), d);
    const auto& v = std::get<ValueConstraint>(a);
    EXPECT_EQ(v.targets()[1], 4.0);
    EXPECT_EQ(v.targets()[2 * 16 + 3], 5.0);
    auto b = build_constraint(json::parse(R"({"type":"value_mask","random_points":100,"seed":3,"family":"stokes"})"), d);
    EXPECT_EQ(std::get<ValueConstraint>(b).mask().count(), 100u);
    auto c = build_constraint(json::parse(R"({"type":"value_mask","random_points":100,"seed":3,"family":"stokes"})"), d);
    EXPECT_EQ(std::get<ValueConstraint>(b).mask(), std::get<ValueConstraint>(c).mask());
    EXPECT_THROW(build_constraint(json::parse(R"({"type":"value_mask","indices":[9999],"values":[1]})"), d),
                 data_error);
}

TEST(ConstraintSpec, Conservation) {
    const auto d = family_domain(Family::heat, 32, 8);
    const auto c = build_constraint(json::parse(R"({"type":"conservation","family":"heat"})"), d);
    EXPECT_EQ(std::get<RegionConstraint>(c).regions().size(), 8u);
}

TEST(ConstraintSpec, Errors) {
    const auto d = stokes16();
    EXPECT_THROW(build_constraint(json::parse(R"({"kind":"ic"})"), d), data_error);
    EXPECT_THROW(build_constraint(json::parse(R"({"type":"wat"})"), d), data_error);
    EXPECT_THROW(build_constraint(json::parse(R"({"type":"ic"})"), d), data_error);
    EXPECT_THROW(build_constraint(json::parse(R"({"type":"ic","family":"heat"})"), d), domain_mismatch);
    EXPECT_THROW(build_constraint(json::parse(R"({"type":"ic","family":"stokes","params":{"k":"x"}})"), d),
                 data_error);
}

TEST(Serialize, EvalReportKeys) {
    EvalReport r;
    r.mmse = 1;
    r.smse = 2;
    const auto j = to_json(r);
    for (const char* k : {"mmse", "smse", "ce", "fpd", "ll"}) EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_TRUE(j["ll"].is_null());
    r.ll = -0.5;
    EXPECT_EQ(to_json(r)["ll"].get<double>(), -0.5);
}

TEST(Manifest, RecordsAndVerifiesOutputs) {
    const auto dir = fs::temp_directory_path() / "eci_manifest_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto out = (dir / "a.txt").string();
    std::ofstream(out) << "hello";
    RunManifest m("test");
    m.config()["x"] = 1;
    m.seeds()["seed"] = 7;
    m.output(out);
    const auto mp = (dir / "manifest.json").string();
    m.write(mp);
    const auto doc = read_json_file(mp);
    EXPECT_EQ(doc["command"], "test");
    EXPECT_TRUE(doc["outputs"].contains("a.txt"));
    EXPECT_TRUE(verify_manifest(mp).empty());
    std::ofstream(out) << "changed";
    EXPECT_EQ(verify_manifest(mp), std::vector<std::string>{"a.txt"});
}
