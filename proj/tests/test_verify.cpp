// Copyright 2026 The fedsvd-sim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <set>
#include <sstream>
#include <string>

#include "fedsvd/verify.hpp"

namespace fedsvd {
namespace {

TEST(Verify, EachScopeHasNoViolations) {
  for (const char* scope : {"linalg", "theorem", "privacy", "gradients"}) {
    const VerifyReport rep = run_verify(scope, 12, 1);
    EXPECT_FALSE(rep.records.empty()) << scope;
    EXPECT_EQ(rep.violations(), 0u) << scope;
    for (const MarginRecord& r : rep.records) {
      EXPECT_EQ(r.suite, scope);
      EXPECT_TRUE(r.pass) << r.suite << "/" << r.check << " trial " << r.trial
                          << ": " << r.value << " vs " << r.limit;
    }
  }
}

TEST(Verify, AllIsUnionOfScopes) {
  const VerifyReport all = run_verify("all", 5, 3);
  std::size_t parts = 0;
  for (const char* scope : {"linalg", "theorem", "privacy", "gradients"})
    parts += run_verify(scope, 5, 3).records.size();
  EXPECT_EQ(all.records.size(), parts);
  std::set<std::string> suites;
  for (const MarginRecord& r : all.records) suites.insert(r.suite);
  EXPECT_EQ(suites.size(), 4u);
}

TEST(Verify, Deterministic) {
  std::ostringstream a, b, c;
  write_margins(a, run_verify("all", 4, 9));
  write_margins(b, run_verify("all", 4, 9));
  write_margins(c, run_verify("all", 4, 10));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

TEST(Verify, UnknownScopeThrows) {
  EXPECT_THROW(run_verify("everything", 1, 0), std::invalid_argument);
  EXPECT_THROW(run_verify("", 1, 0), std::invalid_argument);
}

TEST(Verify, MarginsCsv) {
  VerifyReport rep;
  rep.records.push_back({"linalg", "reconstruction", 3, 1.5e-14, 1e-9, true});
  rep.records.push_back({"privacy", "spent", 0, 2.0, 1.0, false});
  EXPECT_EQ(rep.violations(), 1u);
  std::ostringstream out;
  write_margins(out, rep);
  EXPECT_EQ(out.str(),
            "suite,check,trial,value,limit,pass\n"
            "linalg,reconstruction,3,1.500000e-14,1.000000e-09,1\n"
            "privacy,spent,0,2.000000e+00,1.000000e+00,0\n");
}

}  // namespace
}  // namespace fedsvd
