"""Growth of E_k in k, and the failure of square integrability near x = 0.

    python3 scripts/e_growth.py
"""
from trimap import nuclear_rep
from trimap.map_core import TrianglePoint


def main():
    for x, y in [(0.9, 0.3), (0.5, 0.25), (0.1, 0.05)]:
        p = TrianglePoint(x, y)
        r = nuclear_rep.growth_ratios(p, 50)
        vals, _ = nuclear_rep.E_series_all(200, p)
        print(f"(x, y) = ({x}, {y}): max E_k x^2/((k+1)(1+y)) for k<=50 = {r.max():.4f}; "
              f"E_200 x^2 = {vals[-1] * x * x:.12f}")

    print("\nint_{x > x_min} E_0^2 dx dy:")
    prev = None
    for lo, total in nuclear_rep.e_l2_divergence(0):
        step = "" if prev is None else f"  (+{total - prev:.4f})"
        print(f"  x_min = {lo:<8g} {total:.6f}{step}")
        prev = total


if __name__ == "__main__":
    main()
