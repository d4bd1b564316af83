#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include <oprisk/io.hpp>

using namespace oprisk;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("oprisk_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& content) {
    const auto p = dir_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  template <class F>
  static std::string error_of(F&& f) {
    try {
      f();
    } catch (const validation_error& e) {
      return e.what();
    }
    return {};
  }

  fs::path dir_;
};

const char* fifteen_year_counts =
    "bank_id,year,count,exposure\n"
    "bank,1,0,1\nbank,2,0,1\nbank,3,0,1\nbank,4,0,1\nbank,5,1,1\nbank,6,0,1\nbank,7,1,1\nbank,8,1,1\n"
    "bank,9,1,1\nbank,10,0,1\nbank,11,2,1\nbank,12,1,1\nbank,13,1,1\nbank,14,2,1\nbank,15,0,1\n";

} // namespace

TEST(FormatNumber, TwelveSignificantDigits) {
  EXPECT_EQ(io::format_number(0.1), "0.1");
  EXPECT_EQ(io::format_number(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(io::format_number(123456789012345.0), "1.23456789012e+14");
  EXPECT_EQ(io::format_number(-2.5e-7), "-2.5e-07");
  EXPECT_EQ(io::format_number(0.0), "0");
  EXPECT_EQ(io::format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(io::format_number(std::nan("")), "nan");
  EXPECT_EQ(io::round12(1.0 / 3.0), 0.333333333333);
  EXPECT_EQ(io::format_number(io::round12(2.0 / 3.0)), io::format_number(2.0 / 3.0));
}

TEST_F(IoTest, FifteenYearCountsFormOneBank) {
  const auto in = io::ingest_counts(write("counts.csv", fifteen_year_counts));
  ASSERT_EQ(in.panel.banks.size(), 1u);
  EXPECT_EQ(in.panel.banks[0].bank_id, "bank");
  EXPECT_EQ(in.panel.banks[0].records.size(), 15u);
  EXPECT_EQ(in.panel.banks[0].total_count(), 10);
  EXPECT_EQ(in.panel.banks[0].records[10].count, 2);
  EXPECT_TRUE(in.warnings.empty());
}

TEST_F(IoTest, NegativeCountNamesTheLine) {
  const auto p = write("counts.csv", "bank_id,year,count,exposure\na,1,0,1\na,2,-1,1\n");
  const auto msg = error_of([&] { io::ingest_counts(p); });
  EXPECT_NE(msg.find("counts.csv:3:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("non-negative"), std::string::npos) << msg;
}

TEST_F(IoTest, HeaderOnlyFileWarns) {
  const auto counts = io::ingest_counts(write("counts.csv", "bank_id,year,count,exposure\n"));
  EXPECT_TRUE(counts.panel.banks.empty());
  ASSERT_EQ(counts.warnings.size(), 1u);
  EXPECT_NE(counts.warnings[0].find("no data rows"), std::string::npos);

  const auto losses = io::ingest_losses(write("losses.csv", "cell_id,year,amount\n"));
  EXPECT_TRUE(losses.cells.empty());
  EXPECT_EQ(losses.warnings.size(), 1u);
}

TEST_F(IoTest, MalformedInputs) {
  EXPECT_NE(error_of([&] { io::ingest_counts(write("a.csv", "bank_id,year,exposure\na,1,1\n")); }).find("missing column 'count'"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::ingest_counts(write("b.csv", "bank_id,year,count\na,1\n")); }).find("b.csv:2:"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::ingest_counts(write("c.csv", "bank_id,year,count\na,1,x\n")); }).find("cannot parse count"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::ingest_counts(write("d.csv", "bank_id,year,count\na,1,1.5\n")); }).find("d.csv:2:"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::ingest_counts(write("e.csv", "bank_id,year,count,exposure\na,1,1,0\n")); }).find("exposure"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::ingest_counts(write("f.csv", "bank_id,year,count\n,1,1\n")); }).find("empty bank_id"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::ingest_counts(write("g.csv", "")); }).find("missing header"), std::string::npos);
  EXPECT_NE(error_of([&] { io::ingest_counts(dir_ / "absent.csv"); }).find("cannot open"), std::string::npos);
  EXPECT_NE(error_of([&] { io::ingest_losses(write("h.csv", "cell_id,year,amount\nc,1,-3\n")); }).find("h.csv:2:"),
            std::string::npos);
  EXPECT_NE(error_of([&] { io::ingest_losses(write("i.csv", "cell_id,amount\nc,3\n")); }).find("missing column 'year'"),
            std::string::npos);
}

TEST_F(IoTest, ExposureColumnIsOptional) {
  const auto in = io::ingest_counts(write("counts.csv", "year,count,bank_id\n1,3,x\n2,1,y\n3,0,x\n"));
  ASSERT_EQ(in.panel.banks.size(), 2u);
  EXPECT_EQ(in.panel.banks[0].bank_id, "x");
  EXPECT_EQ(in.panel.banks[0].records.size(), 2u);
  EXPECT_EQ(in.panel.banks[0].records[1].year, 3);
  for (const auto& b : in.panel.banks) {
    for (const auto& r : b.records) EXPECT_EQ(r.exposure, 1.0);
  }
}

TEST_F(IoTest, CrlfAndBlankLinesAreTolerated) {
  const auto in = io::ingest_counts(write("counts.csv", "bank_id,year,count,exposure\r\na,1,2,0.5\r\n\r\na,2,1,1.5\r\n"));
  ASSERT_EQ(in.panel.banks.size(), 1u);
  EXPECT_EQ(in.panel.banks[0].total_count(), 3);
  EXPECT_EQ(in.panel.banks[0].total_exposure(), 2.0);
}

TEST_F(IoTest, CountsRoundTripByteIdentical) {
  const std::string text = "bank_id,year,count,exposure\nb1,2001,3,0.75\nb1,2002,0,1.25\nb2,2001,7,0.333333333333\n";
  const auto in = io::ingest_counts(write("counts.csv", text));
  std::ostringstream out;
  io::emit_counts(out, in.panel);
  EXPECT_EQ(out.str(), text);
  const auto again = io::ingest_counts(write("again.csv", out.str()));
  std::ostringstream out2;
  io::emit_counts(out2, again.panel);
  EXPECT_EQ(out2.str(), text);
}

TEST_F(IoTest, LossesRoundTripByteIdentical) {
  const std::string text = "cell_id,year,amount\nfraud,1,1.5\nfraud,2,12345.6789\nit,1,3.14159265359\n";
  const auto in = io::ingest_losses(write("losses.csv", text));
  std::ostringstream out;
  io::emit_losses(out, in.cells);
  EXPECT_EQ(out.str(), text);
}

TEST_F(IoTest, ThresholdDropsAndCountsSmallLosses) {
  const auto p = write("losses.csv", "cell_id,year,amount\nc,1,0.5\nc,1,2\nc,2,0.99\nd,1,0.1\nc,3,1\n");
  const auto in = io::ingest_losses(p, 1.0);
  ASSERT_EQ(in.cells.size(), 2u);
  EXPECT_EQ(in.cells[0].losses.size(), 2u); // 2 and 1 are kept, the threshold is inclusive
  EXPECT_TRUE(in.cells[1].losses.empty());
  EXPECT_EQ(in.below_threshold.at("c"), 2u);
  EXPECT_EQ(in.below_threshold.at("d"), 1u);
  EXPECT_EQ(in.warnings.size(), 2u);

  const auto all = io::ingest_losses(p);
  EXPECT_EQ(all.cells[0].losses.size(), 4u);
  EXPECT_TRUE(all.below_threshold.empty());
}

TEST_F(IoTest, TrajectorySchema) {
  std::ostringstream out;
  io::emit_trajectory(out, {{1, 3.407, 0.128160418483, 0.436650326068, 0.0}});
  EXPECT_EQ(out.str(), "step,alpha_hat,beta_hat,bayes_estimate,mle_estimate\n1,3.407,0.128160418483,0.436650326068,0\n");
}

TEST_F(IoTest, WriteFileCreatesDirectories) {
  const auto p = dir_ / "nested" / "deeper" / "out.txt";
  io::write_file(p, "abc\n");
  EXPECT_EQ(slurp(p), "abc\n");
  io::write_file(p, "x");
  EXPECT_EQ(slurp(p), "x");
}
