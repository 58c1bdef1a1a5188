//! IoU and Dice on two small label masks.

use fedsecure::metrics::{dice_from_iou, dice_scores, miou, ConfusionTotals, Mask};

fn main() {
    let truth = Mask::parse(
        "6 4
         0 0 1 1 2 2
         0 0 1 1 2 2
         0 0 1 1 2 2
         0 0 0 0 2 2",
    )
    .unwrap();
    let pred = Mask::parse(
        "6 4
         0 0 1 1 1 2
         0 1 1 1 2 2
         0 0 1 1 2 2
         0 0 0 2 2 2",
    )
    .unwrap();
    let totals = ConfusionTotals::from_masks(std::slice::from_ref(&pred), std::slice::from_ref(&truth), 3).unwrap();
    for c in 0..3 {
        println!("class {c}: IoU {:.4}  Dice {:.4}", totals.iou(c), totals.dice(c));
    }
    let (_, mdice) = dice_scores(std::slice::from_ref(&pred), std::slice::from_ref(&truth), 3).unwrap();
    println!("mIoU {:.4}  mDice {:.4}", miou(&[pred], &[truth], 3).unwrap(), mdice);
    println!("IoU 1/3 corresponds to Dice {}", dice_from_iou(1.0 / 3.0));
}
