//! Minimal extended-precision complex arithmetic on top of `astro_float`.

use astro_float::{BigFloat, Consts, RoundingMode};
use num_complex::Complex64;

/// Working precision in bits.
pub const HP_BITS: usize = 192;

#[derive(Clone, Debug)]
pub struct Hc {
    pub re: BigFloat,
    pub im: BigFloat,
}

pub struct HpCtx {
    p: usize,
    rm: RoundingMode,
    consts: Consts,
}

fn to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    format!("{x}").parse::<f64>().unwrap_or(f64::NAN)
}

impl HpCtx {
    pub fn new() -> Self {
        HpCtx { p: HP_BITS, rm: RoundingMode::ToEven, consts: Consts::new().expect("constant cache") }
    }

    pub fn real(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, self.p)
    }

    pub fn c(&self, z: Complex64) -> Hc {
        Hc { re: self.real(z.re), im: self.real(z.im) }
    }

    pub fn zero(&self) -> Hc {
        self.c(Complex64::new(0.0, 0.0))
    }

    pub fn one(&self) -> Hc {
        self.c(Complex64::new(1.0, 0.0))
    }

    pub fn to_c64(&self, z: &Hc) -> Complex64 {
        Complex64::new(to_f64(&z.re), to_f64(&z.im))
    }

    pub fn pi(&mut self) -> BigFloat {
        self.consts.pi(self.p, self.rm)
    }

    pub fn add(&self, a: &Hc, b: &Hc) -> Hc {
        Hc { re: a.re.add(&b.re, self.p, self.rm), im: a.im.add(&b.im, self.p, self.rm) }
    }

    pub fn sub(&self, a: &Hc, b: &Hc) -> Hc {
        Hc { re: a.re.sub(&b.re, self.p, self.rm), im: a.im.sub(&b.im, self.p, self.rm) }
    }

    pub fn mul(&self, a: &Hc, b: &Hc) -> Hc {
        let (p, rm) = (self.p, self.rm);
        let re = a.re.mul(&b.re, p, rm).sub(&a.im.mul(&b.im, p, rm), p, rm);
        let im = a.re.mul(&b.im, p, rm).add(&a.im.mul(&b.re, p, rm), p, rm);
        Hc { re, im }
    }

    /// Multiplication by a real big float.
    pub fn mul_real(&self, a: &Hc, r: &BigFloat) -> Hc {
        Hc { re: a.re.mul(r, self.p, self.rm), im: a.im.mul(r, self.p, self.rm) }
    }

    pub fn scale(&self, a: &Hc, r: f64) -> Hc {
        self.mul_real(a, &self.real(r))
    }

    pub fn div(&self, a: &Hc, b: &Hc) -> Hc {
        let (p, rm) = (self.p, self.rm);
        let den = b.re.mul(&b.re, p, rm).add(&b.im.mul(&b.im, p, rm), p, rm);
        let re = a.re.mul(&b.re, p, rm).add(&a.im.mul(&b.im, p, rm), p, rm);
        let im = a.im.mul(&b.re, p, rm).sub(&a.re.mul(&b.im, p, rm), p, rm);
        Hc { re: re.div(&den, p, rm), im: im.div(&den, p, rm) }
    }

    pub fn sqr(&self, a: &Hc) -> Hc {
        self.mul(a, a)
    }

    pub fn powi(&self, a: &Hc, n: u32) -> Hc {
        let mut out = self.one();
        for _ in 0..n {
            out = self.mul(&out, a);
        }
        out
    }

    pub fn exp(&mut self, a: &Hc) -> Hc {
        let (p, rm) = (self.p, self.rm);
        let m = a.re.exp(p, rm, &mut self.consts);
        let cs = a.im.cos(p, rm, &mut self.consts);
        let sn = a.im.sin(p, rm, &mut self.consts);
        Hc { re: m.mul(&cs, p, rm), im: m.mul(&sn, p, rm) }
    }
}

impl Default for HpCtx {
    fn default() -> Self {
        Self::new()
    }
}
