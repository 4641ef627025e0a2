#include <sstream>

#include <gtest/gtest.h>

#include "rmsequiv/io.hpp"

using namespace rmsequiv;

namespace {

void expect_parse_error(const std::string& text, std::size_t line, std::size_t column) {
    std::istringstream in(text);
    try {
        (void)read_long_csv(in);
        FAIL() << "no error for:\n" << text;
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), line) << e.what();
        EXPECT_EQ(e.column(), column) << e.what();
    }
}

}  // namespace

TEST(LongCsv, GroupsBySubjectInFirstAppearanceOrder) {
    std::istringstream in("\xEF\xBB\xBFsubject,value\r\nb,1.5\r\na,2\r\n\r\nb,2.5\r\na,4\n");
    const auto g = read_long_csv(in);
    ASSERT_EQ(g.subject_count(), 2u);
    EXPECT_EQ(g.groups()[0].id, "b");
    EXPECT_EQ(g.groups()[0].values, (std::vector<double>{1.5, 2.5}));
    EXPECT_EQ(g.groups()[1].values, (std::vector<double>{2.0, 4.0}));
}

TEST(LongCsv, ReportsLineAndColumn) {
    expect_parse_error("subject,value\na,1\nb,x1\n", 3, 3);
    expect_parse_error("subject,value\na,1\nb, 2.5abc\n", 3, 4);
    expect_parse_error("subject,value\na,1\nb\n", 3, 2);
    expect_parse_error("subject,value\na,1,7\n", 2, 4);
    expect_parse_error("subj,value\na,1\n", 1, 1);
    expect_parse_error("", 1, 1);
    expect_parse_error("subject,value\n,1\n", 2, 1);
    expect_parse_error("subject,value\na,inf\n", 2, 3);
}

TEST(LongCsv, OneSubjectIsInvalidData) {
    std::istringstream in("subject,value\na,1\na,2\n");
    try {
        (void)read_long_csv(in);
        FAIL();
    } catch (const ParseError&) {
        FAIL() << "should be a data error, not a parse error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("at least 2 subjects"), std::string::npos);
    }
}

TEST(SummaryCsv, Reads) {
    std::istringstream in("m,mean\n9,-0.026\n10,0.447\n");
    const auto s = read_summary_csv(in, 12.5);
    EXPECT_EQ(s.m(), (std::vector<int>{9, 10}));
    EXPECT_DOUBLE_EQ(s.ybar()[1], 0.447);
    EXPECT_DOUBLE_EQ(s.sse(), 12.5);
}

TEST(SummaryCsv, RejectsBadCounts) {
    std::istringstream zero("m,mean\n0,1.0\n2,1.0\n");
    EXPECT_THROW(read_summary_csv(zero, 1.0), ParseError);
    std::istringstream frac("m,mean\n2.5,1.0\n2,1.0\n");
    try {
        (void)read_summary_csv(frac, 1.0);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_EQ(e.column(), 1u);
    }
}
