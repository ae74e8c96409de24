#include "cellvar/dataset.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace cellvar;
using cellvar::test::vec;

namespace {

Dataset parse(const std::string& text, IngestConfig cfg = {}, Warnings* warnings = nullptr)
{
    std::istringstream in(text);
    return parse_csv(in, cfg, warnings);
}

CapacityTrace raw_trace(std::string id, Eigen::VectorXd times, Eigen::VectorXd ah)
{
    CapacityTrace t;
    t.cell_id = std::move(id);
    t.times = std::move(times);
    t.capacities_ah = std::move(ah);
    return t;
}

std::string grid_csv(int cells, int points)
{
    std::ostringstream csv;
    csv << "cell_id,time,capacity\n";
    for (int c = 0; c < cells; ++c)
        for (int i = 0; i < points; ++i)
            csv << "c" << c << ',' << 100 * i << ',' << 2.0 - 0.01 * i - 0.001 * c << '\n';
    return csv.str();
}

} // namespace

TEST_CASE("ingest a small long-form CSV")
{
    const Dataset ds = parse(grid_csv(2, 5));
    CHECK(ds.cell_count() == 2);
    CHECK(ds.cell_ids() == std::vector<std::string>{"c0", "c1"});
    CHECK(ds.trace("c1").n_points() == 5);
    CHECK(ds.trace("c1").capacities_ah(0) == doctest::Approx(1.999));
    CHECK_THROWS_AS(ds.trace("nope"), DataError);
}

TEST_CASE("ingest a 48-cell file")
{
    CHECK(parse(grid_csv(48, 12)).cell_count() == 48);
}

TEST_CASE("malformed rows are reported with their line numbers")
{
    const std::string csv = "cell_id,time,capacity\n"
                            "a,0,2.0\n"
                            "a,1,abc\n"
                            "a,2,1.9\n"
                            "a,-3,1.9\n";
    try {
        parse(csv);
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("3") != std::string::npos);
        CHECK(msg.find("5") != std::string::npos);
        CHECK(msg.find("abc") != std::string::npos);
    }
    CHECK_THROWS_AS(parse(""), DataError);
    CHECK_THROWS_AS(parse("cell,t,cap\na,0,1\n"), DataError); // unknown columns
}

TEST_CASE("rows are sorted, duplicates keep the last row, time starts at zero")
{
    const std::string csv = "capacity,cell_id,time\n"
                            "1.8,x,30\n"
                            "2.0,x,10\n"
                            "1.95,x,20\n"
                            "1.90,x,20\n"
                            "1.7,x,40\n";
    IngestConfig cfg;
    cfg.min_points = 3;
    const Dataset ds = parse(csv, cfg);
    const auto& t = ds.trace("x");
    CHECK(t.times == vec({0, 10, 20, 30}));
    CHECK(t.capacities_ah == vec({2.0, 1.90, 1.8, 1.7}));
}

TEST_CASE("short cells are rejected with a warning")
{
    std::string csv = grid_csv(7, 6) + "short,0,1.0\nshort,10,0.99\n";
    Warnings warnings;
    IngestConfig cfg;
    cfg.min_points = 4;
    const Dataset ds = parse(csv, cfg, &warnings);
    CHECK(ds.cell_count() == 7);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("short") != std::string::npos);

    // Rejection that leaves fewer than six cells is fatal.
    CHECK_THROWS_AS(parse(grid_csv(5, 6) + "short,0,1.0\n", cfg), DataError);
}

TEST_CASE("column names and options come from a key=value file")
{
    const auto dir = test::scratch_dir("ingest-config");
    {
        std::ofstream kv(dir / "cfg.kv");
        kv << "# layout of a cycler export\n"
           << "name = baumhofer\n"
           << "cell_id_column=Cell\n"
           << "time_column=EFC\n"
           << "capacity_column=Q_Ah\n"
           << "time_unit=cycles\n"
           << "nominal_capacity=1.85\n";
    }
    const IngestConfig cfg = IngestConfig::from_file(dir / "cfg.kv");
    CHECK(cfg.name == "baumhofer");
    CHECK(cfg.capacity_column == "Q_Ah");
    REQUIRE(cfg.nominal_capacity);
    CHECK(*cfg.nominal_capacity == 1.85);
    const Dataset ds = parse("Cell,EFC,Q_Ah\nA,0,1.8\nA,5,1.79\nA,10,1.78\n", cfg);
    CHECK(ds.name == "baumhofer");
    CHECK(ds.time_unit == "cycles");

    IngestConfig other;
    CHECK_THROWS_AS(other.apply({{"colour", "red"}}), ConfigError);
}

TEST_CASE("write then ingest is the identity")
{
    const auto dir = test::scratch_dir("roundtrip");
    Dataset ds;
    ds.name = "round";
    ds.traces.push_back(raw_trace("a", vec({0, 0.1, 1.0 / 3.0, 7}), vec({1.1, 1.0999999, 1.0987654321, 1.05})));
    ds.traces.push_back(raw_trace("b,2", vec({0, 50, 100}), vec({2.2, 2.1, 2.05})));
    write_csv(ds, dir / "d.csv");
    IngestConfig cfg;
    cfg.name = "round";
    const Dataset back = ingest_csv(dir / "d.csv", cfg);
    REQUIRE(back.cell_count() == ds.cell_count());
    for (std::size_t k = 0; k < ds.cell_count(); ++k) {
        CHECK(back.traces[k].cell_id == ds.traces[k].cell_id);
        CHECK(back.traces[k].times == ds.traces[k].times);
        CHECK(back.traces[k].capacities_ah == ds.traces[k].capacities_ah);
    }
    CHECK(dataset_hash(back) == dataset_hash(ds));
}

TEST_CASE("normalisation")
{
    Dataset ds;
    ds.nominal_capacity = 1.1;

    SUBCASE("initial capacity")
    {
        ds.traces.push_back(raw_trace("a", vec({0, 1, 2}), vec({2.0, 1.9, 1.8})));
        const Dataset n = normalize(ds, Normalization::InitialCapacity);
        CHECK(n.traces[0].capacities_pct.isApprox(vec({100, 95, 90}), 1e-15));
        CHECK(n.traces[0].capacities_pct(0) == 100.0);
        CHECK(n.traces[0].normalization == Normalization::InitialCapacity);
    }
    SUBCASE("nominal capacity")
    {
        ds.traces.push_back(raw_trace("a", vec({0, 1}), vec({1.1, 1.045})));
        ds.traces.push_back(raw_trace("b", vec({0, 1}), vec({1.08, 1.0})));
        const Dataset n = normalize(ds, Normalization::NominalCapacity);
        CHECK(n.traces[0].capacities_pct.isApprox(vec({100, 95}), 1e-15));
        CHECK(n.traces[1].capacities_pct(0) == doctest::Approx(98.1818181818).epsilon(1e-10));
    }
    SUBCASE("errors")
    {
        ds.traces.push_back(raw_trace("a", vec({0, 1}), vec({0.0, 1.0})));
        CHECK_THROWS_AS(normalize(ds, Normalization::InitialCapacity), DataError);
        ds.nominal_capacity.reset();
        CHECK_THROWS_AS(normalize(ds, Normalization::NominalCapacity), DataError);
    }
}

TEST_CASE("normalisation is idempotent and initial mode ignores trace scale")
{
    Dataset ds;
    ds.nominal_capacity = 2.0;
    ds.traces.push_back(raw_trace("a", vec({0, 1, 2, 3}), vec({1.93, 1.9, 1.85, 1.84})));
    for (auto mode : {Normalization::InitialCapacity, Normalization::NominalCapacity}) {
        const Dataset once = normalize(ds, mode);
        const Dataset twice = normalize(once, mode);
        CHECK(once.traces[0].capacities_pct == twice.traces[0].capacities_pct);
    }
    Dataset scaled = ds;
    scaled.traces[0].capacities_ah *= 3.7;
    const auto a = normalize(ds, Normalization::InitialCapacity).traces[0].capacities_pct;
    const auto b = normalize(scaled, Normalization::InitialCapacity).traces[0].capacities_pct;
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pre-knee truncation")
{
    Eigen::VectorXd times(8);
    for (int i = 0; i < 8; ++i)
        times(i) = 100.0 * i;
    Dataset ds;
    ds.name = "knee";
    ds.traces.push_back(raw_trace("a", times, Eigen::VectorXd::LinSpaced(8, 2.0, 1.6)));
    ds.traces.push_back(raw_trace("linear", times, Eigen::VectorXd::LinSpaced(8, 2.0, 1.9)));
    ds.traces.push_back(raw_trace("early", times, Eigen::VectorXd::LinSpaced(8, 2.0, 1.5)));
    ds = normalize(ds, Normalization::InitialCapacity);

    std::map<std::string, KneeParams> knees{
        {"a", {600.0, 50.0}}, {"linear", {1e5, 1e3}}, {"early", {150.0, 50.0}}};
    Warnings warnings;
    const Dataset cut = truncate_pre_knee(ds, knees, 4, &warnings);

    REQUIRE(cut.cell_count() == 2);
    CHECK(cut.traces[0].times == vec({0, 100, 200, 300, 400, 500}));
    CHECK(cut.traces[0].capacities_ah == ds.traces[0].capacities_ah.head(6));
    CHECK(cut.traces[0].capacities_pct == ds.traces[0].capacities_pct.head(6));
    CHECK(cut.traces[1].times == ds.traces[1].times);
    CHECK(cut.traces[1].capacities_ah == ds.traces[1].capacities_ah);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("early") != std::string::npos);

    std::map<std::string, KneeParams> all_early{{"a", {10, 50}}, {"linear", {10, 50}}, {"early", {10, 50}}};
    CHECK_THROWS_AS(truncate_pre_knee(ds, all_early), DataError);
}

TEST_CASE("dataset hash tracks content")
{
    Dataset ds;
    ds.name = "h";
    ds.traces.push_back(raw_trace("a", vec({0, 1, 2}), vec({2.0, 1.9, 1.8})));
    const auto h = dataset_hash(ds);
    Dataset changed = ds;
    changed.traces[0].capacities_ah(2) = 1.8000000000000003;
    CHECK(dataset_hash(changed) != h);
    changed = ds;
    changed.traces[0].cell_id = "b";
    CHECK(dataset_hash(changed) != h);
    CHECK(dataset_hash(ds) == h);
}
