/* Minimal C caller: budget of the shipped device and a Lorentzian fit. */
#include <math.h>
#include <stdio.h>

#include "transduce.h"

static int check(TransduceStatus s, const char *what) {
    if (s != TRANSDUCE_STATUS_OK) {
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, transduce_last_error());
        return 1;
    }
    return 0;
}

int main(void) {
    TransduceDevice *dev = NULL;
    double total = 0.0, electrical = 0.0, optical = 0.0;
    if (check(transduce_device_reference(&dev), "device")) return 1;
    if (check(transduce_budget(dev, &total, &electrical, &optical), "budget")) return 1;
    printf("transduce %s\n", transduce_version());
    printf("budget total %.4e (electrical %.4e, optical %.4e)\n", total, electrical, optical);

    double c0 = 0.0, c_om = 0.0;
    if (check(transduce_cooperativity(dev, "2.799GHz", 148.0, &c0, &c_om), "cooperativity")) return 1;
    printf("C0 %.4e, C_om at n_c=148 %.4f\n", c0, c_om);
    transduce_device_free(dev);

    enum { N = 101 };
    double x[N], y[N];
    for (int i = 0; i < N; i++) {
        double d = (i - N / 2) * 5e3;
        x[i] = 2.799e9 + d;
        y[i] = 1.0 / (1.0 + 4.0 * d * d / (67e3 * 67e3));
    }
    TransduceFit *fit = NULL;
    if (check(transduce_fit_lorentzian(x, y, N, &fit), "fit")) return 1;
    double fwhm = 0.0, sigma = 0.0;
    if (check(transduce_fit_param(fit, "fwhm", &fwhm, &sigma), "param")) return 1;
    printf("fitted fwhm %.1f Hz\n", fwhm);
    transduce_fit_free(fit);

    /* Errors come back as a status plus a message, never a crash. */
    TransduceStatus s = transduce_budget(NULL, &total, NULL, NULL);
    printf("null handle -> status %d: %s\n", (int)s, transduce_last_error());
    return (s == TRANSDUCE_STATUS_NULL_POINTER && fabs(fwhm - 67e3) < 1.0) ? 0 : 1;
}
