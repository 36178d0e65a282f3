mod common;

use persuade::neural::{forward_layers, ActivationPattern, ArchKind, Architecture, Network};
use rand::Rng;

type Layer = (Vec<Vec<f64>>, Vec<f64>);

/// Splits a flat `n_out × n_in` weight block plus bias into layer form.
fn take_layer(flat: &[f64], at: &mut usize, n_in: usize, n_out: usize, bias: bool) -> Layer {
    let w = (0..n_out)
        .map(|r| flat[*at + r * n_in..*at + (r + 1) * n_in].to_vec())
        .collect();
    *at += n_in * n_out;
    let b = if bias {
        let b = flat[*at..*at + n_out].to_vec();
        *at += n_out;
        b
    } else {
        vec![0.0; n_out]
    };
    (w, b)
}

fn small_dnl() -> Architecture {
    Architecture::Dnl {
        input: 3,
        hidden: vec![4, 3, 2],
        output: 1,
        lower: 1,
        hyper_hidden: vec![2],
    }
}

/// Parameter count of the DNL upper part for `small_dnl`.
const SMALL_HIGHER: usize = (4 * 3 + 3) + (3 * 2 + 2) + (2 + 1);
const SMALL_LOWER: usize = 3 * 4 + 4;

#[test]
fn dnl_with_constant_hypernetwork_is_a_relu_stack() {
    let mut r = common::rng(1);
    let mut net = Network::init(small_dnl(), &mut r).unwrap();
    let total = net.param_count();
    // silence every hypernetwork weight and bias except the output bias
    net.params_mut()[SMALL_LOWER..total - SMALL_HIGHER]
        .iter_mut()
        .for_each(|v| *v = 0.0);
    let flat = net.params().to_vec();
    let mut at = 0;
    let mut layers = vec![take_layer(&flat, &mut at, 3, 4, true)];
    let theta = &flat[total - SMALL_HIGHER..];
    let mut at = 0;
    for (n_in, n_out) in [(4, 3), (3, 2), (2, 1)] {
        layers.push(take_layer(theta, &mut at, n_in, n_out, true));
    }
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        let (y, pattern) = net.forward(&x).unwrap();
        assert!((y[0] - forward_layers(&layers, &x)[0]).abs() < 1e-12);
        assert_eq!(net.generated_params(&pattern).unwrap(), theta);
    }
}

#[test]
fn delu_with_constant_aux_is_relu_plus_bias() {
    let arch = Architecture::Delu {
        input: 3,
        hidden: vec![5, 4],
        output: 1,
        aux_hidden: vec![3],
    };
    let mut r = common::rng(2);
    let mut net = Network::init(arch, &mut r).unwrap();
    let backbone = (3 * 5 + 5) + (5 * 4 + 4) + 4;
    let total = net.param_count();
    let c = 0.75;
    net.params_mut()[backbone..]
        .iter_mut()
        .for_each(|v| *v = 0.0);
    net.params_mut()[total - 1] = c;
    let flat = net.params().to_vec();
    let mut at = 0;
    let layers = vec![
        take_layer(&flat, &mut at, 3, 5, true),
        take_layer(&flat, &mut at, 5, 4, true),
        take_layer(&flat, &mut at, 4, 1, false),
    ];
    for _ in 0..50 {
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        let y = net.forward(&x).unwrap().0[0];
        assert!((y - (forward_layers(&layers, &x)[0] + c)).abs() < 1e-12);
    }
}

/// DNL on one input whose upper part computes `|x|` on a single lower piece.
fn absolute_value_dnl() -> Network {
    let arch = Architecture::Dnl {
        input: 1,
        hidden: vec![2, 2],
        output: 1,
        lower: 1,
        hyper_hidden: vec![1],
    };
    // lower: u1 = relu(x + 10), u2 = relu(10)
    let mut p = vec![1.0, 0.0, 10.0, 10.0];
    // hypernetwork: zero hidden layer, output bias carries the upper weights
    p.extend([0.0, 0.0, 0.0]);
    let upper = [
        1.0, -1.0, -1.0, 1.0, 0.0, 0.0, // v = relu([u1 - u2, u2 - u1])
        1.0, 1.0, 0.0, // out = v1 + v2
    ];
    p.extend(vec![0.0; upper.len()]);
    p.extend(upper);
    Network::from_params(arch, p).unwrap()
}

#[test]
fn dnl_is_nonlinear_within_one_lower_piece() {
    let net = absolute_value_dnl();
    let f = |x: f64| net.forward(&[x]).unwrap();
    let (a, pa) = f(-1.0);
    let (b, pb) = f(1.0);
    let (m, pm) = f(0.0);
    assert_eq!(pa, pb);
    assert_eq!(pa, pm);
    let violation = ((a[0] + b[0]) / 2.0 - m[0]).abs();
    assert!(violation > 0.1, "collinearity violation {violation}");
}

#[test]
fn relu_and_delu_are_linear_on_a_pattern_piece() {
    let mut r = common::rng(3);
    for kind in [ArchKind::Relu, ArchKind::Delu] {
        let net = Network::init(Architecture::standard(kind, 6), &mut r).unwrap();
        let mut checked = 0;
        while checked < 100 {
            let x: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
            let d: Vec<f64> = (0..6).map(|_| r.random_range(-1e-4..1e-4)).collect();
            let at = |t: f64| -> Vec<f64> { x.iter().zip(&d).map(|(a, b)| a + t * b).collect() };
            let (y0, p0) = net.forward(&at(0.0)).unwrap();
            let (y1, p1) = net.forward(&at(1.0)).unwrap();
            let (y2, p2) = net.forward(&at(2.0)).unwrap();
            if p0 != p1 || p1 != p2 {
                continue;
            }
            checked += 1;
            assert!((y1[0] - (y0[0] + y2[0]) / 2.0).abs() < 1e-9);
        }
    }
}

#[test]
fn pattern_is_stable_inside_its_margin() {
    let mut r = common::rng(4);
    for kind in [ArchKind::Relu, ArchKind::Delu, ArchKind::Dnl] {
        let net = Network::init(Architecture::standard(kind, 6), &mut r).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
            let margin = net.pattern_margin(&x).unwrap();
            if margin < 1e-6 {
                continue;
            }
            let (_, p) = net.forward(&x).unwrap();
            let y: Vec<f64> = x.iter().map(|v| v + 1e-10 * margin).collect();
            assert_eq!(net.forward(&y).unwrap().1, p);
        }
    }
}

/// Bisects a segment on which the pattern changes down to `tol`.
fn boundary(net: &Network, x: &[f64], y: &[f64], tol: f64) -> (Vec<f64>, Vec<f64>) {
    let point = |t: f64| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    let p_lo = net.forward(x).unwrap().1;
    while hi - lo > tol {
        let mid = (lo + hi) / 2.0;
        if net.forward(&point(mid)).unwrap().1 == p_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (point(lo), point(hi))
}

#[test]
fn generated_parameters_jump_across_lower_pieces() {
    let mut r = common::rng(5);
    let dnl = Network::init(Architecture::standard(ArchKind::Dnl, 4), &mut r).unwrap();
    let relu = Network::init(Architecture::standard(ArchKind::Relu, 4), &mut r).unwrap();
    let mut largest_dnl: f64 = 0.0;
    let mut largest_relu: f64 = 0.0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        for (net, largest) in [(&dnl, &mut largest_dnl), (&relu, &mut largest_relu)] {
            if net.forward(&x).unwrap().1 == net.forward(&y).unwrap().1 {
                continue;
            }
            let (a, b) = boundary(net, &x, &y, 1e-12);
            let jump = (net.forward(&a).unwrap().0[0] - net.forward(&b).unwrap().0[0]).abs();
            *largest = largest.max(jump);
        }
    }
    assert!(largest_dnl > 1e-3, "DNL jump {largest_dnl}");
    assert!(largest_relu < 1e-8, "ReLU jump {largest_relu}");
}

#[test]
fn pattern_lengths_follow_the_architecture() {
    let mut r = common::rng(6);
    let cases = [
        (ArchKind::Relu, 192),
        (ArchKind::Delu, 192),
        (ArchKind::Dnl, 64),
    ];
    for (kind, len) in cases {
        let net = Network::init(Architecture::standard(kind, 8), &mut r).unwrap();
        let (_, p): (_, ActivationPattern) = net.forward(&[0.1; 8]).unwrap();
        assert_eq!(p.len(), len);
    }
}

#[test]
fn relu_signs_cover_every_rectifier() {
    let mut r = common::rng(7);
    // backbone 192; DeLU adds its aux net; DNL is 64 lower + 64 hyper + 128 generated
    let cases = [
        (ArchKind::Relu, 192),
        (ArchKind::Delu, 256),
        (ArchKind::Dnl, 256),
    ];
    for (kind, len) in cases {
        let net = Network::init(Architecture::standard(kind, 8), &mut r).unwrap();
        let x = [0.1; 8];
        let signs = net.relu_signs(&x).unwrap();
        assert_eq!(signs.len(), len);
        let (_, p) = net.forward(&x).unwrap();
        let lower = p.len().min(192);
        assert_eq!(&signs[..lower], &p.0[..lower]);
    }
}

#[test]
fn checkpoint_rejects_other_formats() {
    let net = Network::zeros(small_dnl()).unwrap();
    let text = net
        .to_checkpoint()
        .unwrap()
        .replace("persuade-network/1", "other/9");
    assert!(Network::from_checkpoint(&text).is_err());
}
