#include <gtest/gtest.h>

#include <fstream>
#include <limits>

#include "gbpl/csv.hpp"
#include "gbpl/error.hpp"
#include "tempdir.hpp"

using namespace gbpl;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST(Csv, RoundTripIsExact) {
  oracle::TempDir dir;
  Matrix m(3, 2);
  m << 0.1, -1e-300, 1.0 / 3.0, 12345678.9, -0.0, std::numeric_limits<double>::max();
  csv::write(dir / "a.csv", {"p", "q"}, m);
  const auto t = csv::read(dir / "a.csv");
  ASSERT_EQ(t.header, (std::vector<std::string>{"p", "q"}));
  ASSERT_EQ(t.values.rows(), 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) EXPECT_EQ(t.values.data()[i], m.data()[i]);
}

TEST(Csv, ShortestForm) {
  EXPECT_EQ(csv::format_number(0.1), "0.1");
  EXPECT_EQ(csv::format_number(2.0), "2");
  EXPECT_EQ(csv::format_number(-1.5), "-1.5");
}

TEST(Csv, ColumnLookup) {
  oracle::TempDir dir;
  write_text(dir / "b.csv", "x,y\n1,2\n3,4\n");
  const auto t = csv::read(dir / "b.csv");
  EXPECT_EQ(t.column("y"), 1);
  EXPECT_DOUBLE_EQ(t.values(1, t.column("x")), 3.0);
  EXPECT_THROW(t.column("z"), InvalidArgument);
}

TEST(Csv, RejectsMalformedInput) {
  oracle::TempDir dir;
  write_text(dir / "ragged.csv", "x,y\n1,2\n3\n");
  write_text(dir / "text.csv", "x,y\n1,abc\n");
  EXPECT_THROW(csv::read(dir / "ragged.csv"), IoError);
  EXPECT_THROW(csv::read(dir / "text.csv"), IoError);
  EXPECT_THROW(csv::read(dir / "missing.csv"), IoError);
}
