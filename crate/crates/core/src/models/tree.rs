use super::{
    check_params, lag_design, recursive_forecast, resolve_lags, Domain, FittedModel,
    ForecastModel, HyperparameterPoint, HyperparameterSpace, ModelError, ParamValue, SearchKind,
};

/// CART regression tree on lag windows, squared-error splits.
#[derive(Debug, Clone, Copy, Default)]
pub struct DecisionTree;

#[derive(Debug)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

fn mean(rows: &[usize], y: &[f64]) -> f64 {
    rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64
}

/// Best (feature, threshold, sse) split of `rows`, if any reduces impurity.
fn best_split(rows: &[usize], x: &[Vec<f64>], y: &[f64]) -> Option<(usize, f64)> {
    let n = rows.len() as f64;
    let total: f64 = rows.iter().map(|&i| y[i]).sum();
    let total_sq: f64 = rows.iter().map(|&i| y[i] * y[i]).sum();
    let parent = total_sq - total * total / n;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = rows.to_vec();
    for f in 0..x[0].len() {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for pos in 0..order.len() - 1 {
            let i = order[pos];
            left_sum += y[i];
            left_sq += y[i] * y[i];
            let lo = x[i][f];
            let hi = x[order[pos + 1]][f];
            if lo == hi {
                continue;
            }
            let nl = (pos + 1) as f64;
            let nr = n - nl;
            let right_sum = total - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
            if best.is_none_or(|b| sse < b.0) {
                best = Some((sse, f, lo + (hi - lo) / 2.0));
            }
        }
    }
    best.filter(|b| b.0 < parent - 1e-12 * parent.abs().max(1e-300))
        .map(|(_, f, t)| (f, t))
}

fn grow(rows: Vec<usize>, x: &[Vec<f64>], y: &[f64], depth: usize, max_depth: Option<usize>) -> Node {
    let leaf = Node::Leaf(mean(&rows, y));
    if rows.len() < 2 || max_depth.is_some_and(|m| depth >= m) {
        return leaf;
    }
    let Some((feature, threshold)) = best_split(&rows, x, y) else {
        return leaf;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| x[i][feature] <= threshold);
    Node::Split {
        feature,
        threshold,
        left: Box::new(grow(l, x, y, depth + 1, max_depth)),
        right: Box::new(grow(r, x, y, depth + 1, max_depth)),
    }
}

struct TreeFit {
    root: Node,
    lags: usize,
    history: Vec<f64>,
}

impl FittedModel for TreeFit {
    fn predict(&self, h: usize) -> Result<Vec<f64>, ModelError> {
        recursive_forecast(&self.history, self.lags, h, |w| self.root.predict(w))
    }
}

fn max_depth(point: &HyperparameterPoint) -> Result<Option<usize>, ModelError> {
    match point.get("max_depth") {
        None => Ok(None),
        Some(ParamValue::Cat(s)) if s.eq_ignore_ascii_case("none") => Ok(None),
        Some(ParamValue::Int(d)) if *d >= 1 => Ok(Some(*d as usize)),
        Some(v) => Err(ModelError::InvalidParameter {
            name: "max_depth".into(),
            reason: format!("expected a positive integer or \"none\", got `{v}`"),
        }),
    }
}

impl ForecastModel for DecisionTree {
    fn name(&self) -> &'static str {
        "dtr"
    }

    fn search_kind(&self) -> SearchKind {
        SearchKind::Exhaustive
    }

    fn fixed_point(&self) -> HyperparameterPoint {
        HyperparameterPoint::new().with("max_depth", "none")
    }

    fn space(&self) -> HyperparameterSpace {
        let mut grid: Vec<ParamValue> = (2..=12).map(ParamValue::Int).collect();
        grid.push(ParamValue::Cat("none".into()));
        HyperparameterSpace::new().with("max_depth", Domain::Grid(grid))
    }

    fn fit(
        &self,
        train: &[f64],
        seasonal_period: usize,
        point: &HyperparameterPoint,
    ) -> Result<Box<dyn FittedModel>, ModelError> {
        check_params(point, &["max_depth", "lags"])?;
        let lags = resolve_lags(train, seasonal_period, point)?;
        let depth = max_depth(point)?;
        let (x, y) = lag_design(train, lags);
        let root = grow((0..x.len()).collect(), &x, &y, 0, depth);
        Ok(Box::new(TreeFit {
            root,
            lags,
            history: train.to_vec(),
        }))
    }
}
