#pragma once

// Small datasets shared by session, gateway and acceptance tests.

#include <string>

#include "keyhole/data.hpp"

namespace fixtures {

// Six rows over region, product, revenue and date; three rows are EU.
inline keyhole::data::Dataset sales() {
  return keyhole::data::ingest_csv_text(
      "region,product,revenue,date\n"
      "EU,widget,100,2024-01-05\n"
      "EU,gadget,150,2024-01-20\n"
      "US,widget,200,2024-02-03\n"
      "US,gizmo,50,2024-02-14\n"
      "APAC,gadget,75,2024-03-01\n"
      "EU,gizmo,125,2024-03-09\n");
}

// Five columns: date, region (3 values), product (5 values), churned flag,
// revenue. Month 4 has an unusually high churn rate.
inline keyhole::data::Dataset churn() {
  std::string csv = "date,region,product,churned,revenue\n";
  const char* regions[] = {"EU", "US", "APAC"};
  const char* products[] = {"a", "b", "c", "d", "e"};
  int row = 0;
  for (int month = 1; month <= 6; ++month) {
    for (int i = 0; i < 10; ++i, ++row) {
      bool churned = month == 4 ? i < 9 : i < 2;
      csv += "2024-0" + std::to_string(month) + "-1" + std::to_string(i % 9) + "," + regions[row % 3] + "," +
             products[row % 5] + "," + (churned ? "true" : "false") + "," + std::to_string(100 + row) + "\n";
    }
  }
  return keyhole::data::ingest_csv_text(csv);
}

}  // namespace fixtures
