#include <math.h>
#include <stdio.h>
#include <string.h>

#include "loopgroup.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        LgStatus s_ = (call);                                                \
        if (s_ != LG_STATUS_OK) {                                            \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,                \
                    lg_last_error_message());                                \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    LgForm *form = NULL;
    LgLoop *x = NULL, *minus = NULL, *plus = NULL;
    CHECK(lg_form_builtin("un(2,1)", &form));
    CHECK(lg_random_loop(form, 2, 0.5, 7, &x));
    CHECK(lg_birkhoff_factor(form, x, 16, 1e-8, &minus, &plus));

    double a[8], b[8], c[8];
    CHECK(lg_loop_eval(x, 0.6, 0.8, a, 8));
    CHECK(lg_loop_eval(minus, 0.6, 0.8, b, 8));
    CHECK(lg_loop_eval(plus, 0.6, 0.8, c, 8));
    double worst = 0.0;
    for (int i = 0; i < 2; i++) {
        for (int j = 0; j < 2; j++) {
            double re = 0.0, im = 0.0;
            for (int k = 0; k < 2; k++) {
                double br = b[2 * (2 * i + k)], bi = b[2 * (2 * i + k) + 1];
                double cr = c[2 * (2 * k + j)], ci = c[2 * (2 * k + j) + 1];
                re += br * cr - bi * ci;
                im += br * ci + bi * cr;
            }
            double d = hypot(re - a[2 * (2 * i + j)], im - a[2 * (2 * i + j) + 1]);
            if (d > worst) worst = d;
        }
    }
    if (worst > 1e-8) {
        fprintf(stderr, "remultiplication residual %g\n", worst);
        return 1;
    }

    int64_t w = -1;
    CHECK(lg_winding_det(x, &w));
    if (w != 0) return 1;

    LgLoop *bad = NULL;
    if (lg_loop_from_json("{\"size\":", &bad) != LG_STATUS_PARSE) return 1;
    if (lg_last_error_message() == NULL) return 1;

    lg_loop_free(plus);
    lg_loop_free(minus);
    lg_loop_free(x);
    lg_form_free(form);
    printf("ok\n");
    return 0;
}
