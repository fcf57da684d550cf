#include <stdio.h>
#include "pvtiles.h"

int main(void) {
    PvtReport *r = NULL;
    if (pvt_report_from_counts(142, 2277, 7514, 67, &r) != PVT_STATUS_OK) {
        fprintf(stderr, "%s\n", pvt_last_error_message());
        return 1;
    }
    double acc = 0.0;
    pvt_report_accuracy(r, &acc);
    printf("accuracy %.4f\n", acc);
    pvt_report_free(r);

    PvtReconciliation *rec = NULL;
    pvt_reconciliation_from_counts(107, 35, 2277, 67, 7514, &rec);
    double f = 0.0;
    pvt_reconciliation_new_fraction(rec, &f);
    printf("new %.4f\n", f);
    pvt_reconciliation_free(rec);

    if (pvt_report_from_counts(0, 0, 0, 0, &r) == PVT_STATUS_OK) return 1;
    if (pvt_last_error_message() == NULL) return 1;
    return 0;
}
